#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace cpml {

using Rng = std::mt19937_64;

/// Derives the seed of a named sub-stream from a base seed, so that the
/// split, constraint, synthetic and Monte-Carlo streams can be replayed in isolation.
inline std::uint64_t derive_seed(std::uint64_t base, std::string_view stream) {
  std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
  for (unsigned char ch : stream) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (h | 1ULL);  // splitmix64 finalizer
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::string_view stream, std::uint64_t index) {
  return derive_seed(derive_seed(base, stream) + index, "index");
}

}  // namespace cpml
