#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "divrep/common.hpp"

namespace divrep {

// ---- errors shared by every backend implementation ----

struct TransportError : Error {
  using Error::Error;
};
struct AuthError : Error {
  using Error::Error;
};
struct MalformedResponse : Error {
  using Error::Error;
};
struct PayloadTooLarge : Error {
  using Error::Error;
};
// Service refused to synthesize the prompt; callers drop it from scoring.
struct ContentRefused : Error {
  using Error::Error;
};
struct DimMismatch : Error {
  using Error::Error;
};
struct ConfigError : Error {
  using Error::Error;
};

// ---- domain types ----

struct BackendConfig {
  std::string base_url;
  std::string api_key_env;  // name of the env var holding the key
  std::string model_id;
  int max_parallel = 4;
  int retry_limit = 3;
  int timeout_ms = 60000;
  double temperature = 1.0;
  std::optional<std::int64_t> seed;

  void validate() const {
    if (max_parallel < 1) throw ConfigError("max_parallel must be >= 1");
    if (retry_limit < 0 || retry_limit > 10) throw ConfigError("retry_limit must be in [0, 10]");
    if (timeout_ms <= 0) throw ConfigError("timeout_ms must be positive");
    if (temperature < 0) throw ConfigError("temperature must be >= 0");
  }
};

// Identifies which model produced an image. Index 0 and 1 are the canonical
// pair; higher indices appear in multi-model comparisons.
struct ModelTag {
  int index = 0;

  friend bool operator==(const ModelTag&, const ModelTag&) = default;

  std::string str() const {
    if (index == 0) return "A";
    if (index == 1) return "B";
    return "M" + std::to_string(index);
  }
};

inline constexpr ModelTag model_a{0};
inline constexpr ModelTag model_b{1};

struct ImageHandle {
  std::string id;          // content hash (hex) or, offline, a hex-encoded context
  std::string raster;      // opaque payload; empty for offline handles
  std::string source_prompt_id;
  ModelTag model_tag;
  std::int64_t seed = 0;

  bool has_raster() const { return !raster.empty(); }
};

struct Embedding {
  std::vector<double> v;
  bool normalized = false;

  std::size_t dim() const { return v.size(); }
};

inline double l2_norm(const Embedding& e) {
  double acc = 0.0;
  for (double x : e.v) acc += x * x;
  return std::sqrt(acc);
}

inline Embedding& normalize(Embedding& e) {
  const double n = l2_norm(e);
  if (n > 0.0) {
    for (double& x : e.v) x /= n;
  }
  e.normalized = true;
  return e;
}

inline Embedding normalized(std::vector<double> v) {
  Embedding e{std::move(v), false};
  normalize(e);
  return e;
}

// ---- bounded parallelism ----

// Counting gate that enforces a per-backend in-flight ceiling. The limit is
// taken from the config of each call, so tests can observe the bound directly.
class ParallelGate {
 public:
  class Guard {
   public:
    Guard(ParallelGate& gate, int limit) : gate_(&gate) { gate_->enter(limit); }
    ~Guard() {
      if (gate_) gate_->leave();
    }
    Guard(const Guard&) = delete;
    Guard& operator=(const Guard&) = delete;

   private:
    ParallelGate* gate_;
  };

  Guard enter_scope(int limit) { return Guard(*this, limit); }

  int in_flight() const {
    std::lock_guard lock(mu_);
    return in_flight_;
  }

 private:
  void enter(int limit) {
    if (limit < 1) limit = 1;
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return in_flight_ < limit; });
    ++in_flight_;
  }

  void leave() {
    {
      std::lock_guard lock(mu_);
      --in_flight_;
    }
    cv_.notify_one();
  }

  mutable std::mutex mu_;
  std::condition_variable cv_;
  int in_flight_ = 0;
};

// Retries fn on TransportError with exponential backoff. Auth and other 4xx
// class errors are not retried; they propagate immediately.
template <typename Fn>
auto with_retries(const BackendConfig& cfg, Fn&& fn) -> decltype(fn()) {
  int attempt = 0;
  for (;;) {
    try {
      return fn();
    } catch (const TransportError& e) {
      if (attempt >= cfg.retry_limit) throw;
      const auto delay = std::chrono::milliseconds(50LL << std::min(attempt, 6));
      log_warn(std::string("transient backend failure, retrying: ") + e.what());
      std::this_thread::sleep_for(delay);
      ++attempt;
    }
  }
}

// ---- capability interfaces ----

struct ChatMessage {
  std::string role;  // "system" | "user" | "assistant"
  std::string content;
};

class TextBackend {
 public:
  virtual ~TextBackend() = default;

  std::string generate_text(const std::string& system_prompt, const std::string& user_prompt,
                            const BackendConfig& cfg) {
    if (user_prompt.empty()) throw std::invalid_argument("user_prompt must be non-empty");
    auto guard = gate_.enter_scope(cfg.max_parallel);
    return do_generate({{"system", system_prompt}, {"user", user_prompt}}, cfg);
  }

  // Multi-turn variant used when a follow-up request should see the previous
  // exchange. The base contract is the same as generate_text.
  std::string generate_text_chat(const std::vector<ChatMessage>& messages,
                                 const BackendConfig& cfg) {
    if (messages.empty() || messages.back().content.empty()) {
      throw std::invalid_argument("chat requires a non-empty final message");
    }
    auto guard = gate_.enter_scope(cfg.max_parallel);
    return do_generate(messages, cfg);
  }

 protected:
  virtual std::string do_generate(const std::vector<ChatMessage>& messages,
                                  const BackendConfig& cfg) = 0;

 private:
  ParallelGate gate_;
};

class VisionBackend {
 public:
  virtual ~VisionBackend() = default;

  std::string describe_image_grid(const ImageHandle& grid, const std::string& instruction,
                                  const BackendConfig& cfg) {
    if (instruction.empty()) throw std::invalid_argument("instruction must be non-empty");
    auto guard = gate_.enter_scope(cfg.max_parallel);
    return do_describe(grid, instruction, cfg);
  }

 protected:
  virtual std::string do_describe(const ImageHandle& grid, const std::string& instruction,
                                  const BackendConfig& cfg) = 0;

 private:
  ParallelGate gate_;
};

class ImageBackend {
 public:
  virtual ~ImageBackend() = default;

  std::vector<ImageHandle> synthesize_images(const std::string& prompt, ModelTag tag, int n,
                                             const std::vector<std::int64_t>& seeds,
                                             const BackendConfig& cfg) {
    if (n <= 0) throw std::invalid_argument("n must be positive");
    if (static_cast<int>(seeds.size()) != n) {
      throw std::invalid_argument("seeds must have exactly n entries");
    }
    if (prompt.empty()) throw std::invalid_argument("prompt must be non-empty");
    auto guard = gate_.enter_scope(cfg.max_parallel);
    return do_synthesize(prompt, tag, n, seeds, cfg);
  }

 protected:
  virtual std::vector<ImageHandle> do_synthesize(const std::string& prompt, ModelTag tag, int n,
                                                 const std::vector<std::int64_t>& seeds,
                                                 const BackendConfig& cfg) = 0;

 private:
  ParallelGate gate_;
};

using EmbedPayload = std::variant<std::string, ImageHandle>;

class EmbedBackend {
 public:
  virtual ~EmbedBackend() = default;

  // Returned embeddings are always L2-normalized; downstream cosine math is a
  // plain dot product because of this single normalization site.
  Embedding embed(const EmbedPayload& payload, const BackendConfig& cfg) {
    auto guard = gate_.enter_scope(cfg.max_parallel);
    Embedding e = do_embed(payload, cfg);
    if (!e.normalized) normalize(e);
    check_dim(e);
    return e;
  }

 protected:
  virtual Embedding do_embed(const EmbedPayload& payload, const BackendConfig& cfg) = 0;

 private:
  void check_dim(const Embedding& e) {
    if (e.v.empty()) throw MalformedResponse("embedding has zero dimension");
    std::lock_guard lock(dim_mu_);
    if (expected_dim_ == 0) {
      expected_dim_ = e.dim();
    } else if (expected_dim_ != e.dim()) {
      throw DimMismatch("embedding dim changed mid-run: expected " +
                        std::to_string(expected_dim_) + ", got " + std::to_string(e.dim()));
    }
  }

  ParallelGate gate_;
  std::mutex dim_mu_;
  std::size_t expected_dim_ = 0;
};

// Bundle of all four capabilities plus the configs they are invoked with.
// image_cfgs is indexed by ModelTag::index.
struct Backends {
  std::shared_ptr<TextBackend> text;
  std::shared_ptr<VisionBackend> vision;
  std::shared_ptr<ImageBackend> image;
  std::shared_ptr<EmbedBackend> embed;

  BackendConfig text_cfg;
  BackendConfig vision_cfg;
  BackendConfig embed_cfg;
  std::vector<BackendConfig> image_cfgs;

  const BackendConfig& image_cfg(ModelTag tag) const {
    if (image_cfgs.empty()) {
      static const BackendConfig kDefault{};
      return kDefault;
    }
    const auto idx = static_cast<std::size_t>(tag.index);
    return image_cfgs[std::min(idx, image_cfgs.size() - 1)];
  }
};

// Fans work items out over up to max_workers threads. Results are written by
// index so completion order never affects the output.
template <typename Fn>
void parallel_for(std::size_t n, int max_workers, Fn&& fn) {
  if (n == 0) return;
  const int workers =
      std::max(1, std::min<int>(max_workers, static_cast<int>(n)));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> threads;
  std::mutex err_mu;
  std::exception_ptr first_error;
  threads.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    threads.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(err_mu);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : threads) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace divrep
