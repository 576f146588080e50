#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <iostream>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace divrep {

// Base class for every error the library throws on purpose.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class LogLevel { debug = 0, info = 1, warn = 2, error = 3, off = 4 };

namespace detail {
inline LogLevel& log_level() {
  static LogLevel level = LogLevel::warn;
  return level;
}
inline std::mutex& log_mutex() {
  static std::mutex mu;
  return mu;
}
}  // namespace detail

inline void set_log_level(LogLevel level) { detail::log_level() = level; }

inline void log(LogLevel level, std::string_view msg) {
  if (level < detail::log_level()) return;
  static const char* names[] = {"debug", "info", "warn", "error"};
  std::lock_guard lock(detail::log_mutex());
  std::cerr << "[divrep:" << names[static_cast<int>(level)] << "] " << msg << "\n";
}

inline void log_debug(std::string_view msg) { log(LogLevel::debug, msg); }
inline void log_info(std::string_view msg) { log(LogLevel::info, msg); }
inline void log_warn(std::string_view msg) { log(LogLevel::warn, msg); }
inline void log_error(std::string_view msg) { log(LogLevel::error, msg); }

// ---- small string helpers used across modules ----

inline std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

inline std::string trim(std::string_view s) {
  auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
  std::size_t b = 0, e = s.size();
  while (b < e && is_space(s[b])) ++b;
  while (e > b && is_space(s[e - 1])) --e;
  return std::string(s.substr(b, e - b));
}

// Collapses every whitespace run to a single space and trims the ends.
inline std::string normalize_whitespace(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool in_space = true;
  for (unsigned char c : s) {
    if (std::isspace(c)) {
      if (!in_space) out.push_back(' ');
      in_space = true;
    } else {
      out.push_back(static_cast<char>(c));
      in_space = false;
    }
  }
  if (!out.empty() && out.back() == ' ') out.pop_back();
  return out;
}

inline std::vector<std::string> split_whitespace(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  for (unsigned char c : s) {
    if (std::isspace(c)) {
      if (!cur.empty()) out.push_back(std::move(cur)), cur.clear();
    } else {
      cur.push_back(static_cast<char>(c));
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

inline std::vector<std::string> split_lines(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == '\n') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

inline bool contains_ci(std::string_view haystack, std::string_view needle) {
  if (needle.empty()) return true;
  const std::string h = to_lower(haystack);
  const std::string n = to_lower(needle);
  return h.find(n) != std::string::npos;
}

inline bool starts_with_ci(std::string_view s, std::string_view prefix) {
  if (s.size() < prefix.size()) return false;
  return to_lower(s.substr(0, prefix.size())) == to_lower(prefix);
}

inline std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

inline int word_count(std::string_view s) {
  return static_cast<int>(split_whitespace(s).size());
}

}  // namespace divrep
