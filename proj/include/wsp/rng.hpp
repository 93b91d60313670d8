// wsp/rng.hpp
//
// Seeded random streams. Every stochastic step in the workbench draws from a
// stream derived from (seed, key) so results do not depend on the order in
// which utterances or cells are processed.
#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace wsp {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// 64-bit FNV-1a. Stable across platforms, used for stream keys and cell ids.
inline std::uint64_t fnv1a64(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline Rng keyed_stream(std::uint64_t seed, std::string_view key) {
  return Rng(splitmix64(seed ^ splitmix64(fnv1a64(key))));
}

inline Rng keyed_stream(std::uint64_t seed, std::uint64_t key) {
  return Rng(splitmix64(seed ^ splitmix64(key + 0x51ed27)));
}

inline double uniform01(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

inline bool bernoulli(Rng& rng, double p) { return uniform01(rng) < p; }

// Uniform integer in [lo, hi].
inline int uniform_int(Rng& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

}  // namespace wsp
