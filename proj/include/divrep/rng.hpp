#pragma once

#include <cstdint>
#include <cstring>
#include <random>
#include <string>
#include <string_view>

#include "divrep/hash.hpp"

namespace divrep {

// Derives an independent 64-bit seed from a base seed and a string key.
// Hash-based splitting keeps streams independent of call order, which is what
// makes replayed runs reproducible under arbitrary parallel scheduling.
inline std::uint64_t derive_seed(std::uint64_t base, std::string_view domain,
                                 std::string_view key = {}) {
  std::string material;
  material.reserve(8 + 2 + domain.size() + key.size());
  for (int i = 0; i < 8; ++i) {
    material.push_back(static_cast<char>((base >> (8 * i)) & 0xff));
  }
  material.push_back('\x1f');
  material.append(domain);
  material.push_back('\x1f');
  material.append(key);
  const auto digest = sha256_bytes(material);
  std::uint64_t seed = 0;
  std::memcpy(&seed, digest.data(), sizeof(seed));
  return seed;
}

inline std::mt19937_64 make_rng(std::uint64_t base, std::string_view domain,
                                std::string_view key = {}) {
  return std::mt19937_64(derive_seed(base, domain, key));
}

// Uniform index in [0, n). n must be > 0.
inline std::size_t rand_index(std::mt19937_64& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

inline double rand_unit(std::mt19937_64& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

// Sample k distinct indices from [0, n) without replacement (k may exceed n,
// in which case all n indices are returned). Order is the draw order.
inline std::vector<std::size_t> sample_without_replacement(std::mt19937_64& rng, std::size_t n,
                                                           std::size_t k) {
  std::vector<std::size_t> pool(n);
  for (std::size_t i = 0; i < n; ++i) pool[i] = i;
  const std::size_t take = std::min(n, k);
  for (std::size_t i = 0; i < take; ++i) {
    const std::size_t j = i + rand_index(rng, n - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(take);
  return pool;
}

}  // namespace divrep
