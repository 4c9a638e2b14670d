#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace citylight {

inline std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t hash = 0xcbf29ce484222325ULL) {
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Independent named stream derived from one run seed ("sim", "agent",
// "init", ...). Adding a new consumer never shifts an existing stream.
inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream) {
  return splitmix64(seed ^ fnv1a64(stream));
}

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed, std::string_view stream) { return Rng(derive_seed(seed, stream)); }

// Uniform in [0, 1) built from raw engine bits, so results do not depend
// on the standard library's distribution implementation.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline int uniform_index(Rng& rng, int n) {
  return static_cast<int>(uniform01(rng) * static_cast<double>(n));
}

}  // namespace citylight
