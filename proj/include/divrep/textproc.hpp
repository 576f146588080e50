#pragma once

#include <set>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "divrep/common.hpp"

namespace divrep {

// Lowercase, map every non-alphanumeric byte to a space, split.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::string buf;
  buf.reserve(text.size());
  for (unsigned char c : text) {
    if (std::isalnum(c)) {
      buf.push_back(static_cast<char>(std::tolower(c)));
    } else {
      buf.push_back(' ');
    }
  }
  return split_whitespace(buf);
}

inline const std::unordered_set<std::string>& default_stopwords() {
  static const std::unordered_set<std::string> words = {
      "a",    "an",   "and",  "are",  "as",   "at",   "be",   "been", "by",   "for",
      "from", "had",  "has",  "have", "in",   "is",   "it",   "its",  "of",   "on",
      "or",   "that", "the",  "these", "this", "those", "to",  "was",  "were", "with"};
  return words;
}

inline bool is_stopword(const std::string& token) {
  return default_stopwords().count(token) > 0;
}

// Tokenized, stopword-free, de-duplicated view of a phrase.
inline std::set<std::string> content_token_set(std::string_view text) {
  std::set<std::string> out;
  for (auto& t : tokenize(text)) {
    if (!is_stopword(t)) out.insert(std::move(t));
  }
  return out;
}

}  // namespace divrep
