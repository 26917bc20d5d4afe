#pragma once

#include <cstdint>
#include <random>

namespace uird {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Sub-seed for (task, purpose). Fixed offsets, so appending tasks never
// changes the streams used by earlier ones.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t task,
                                 std::uint64_t purpose) {
  return splitmix64(master + 1000003ULL * task + 7919ULL * purpose);
}

// Uniform on [0, 1], both ends reachable.
inline double uniform_closed(Rng& rng) {
  return static_cast<double>(rng() >> 11) * (1.0 / 9007199254740991.0);
}

}  // namespace uird
