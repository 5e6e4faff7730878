#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace gsh {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed for an independent stream identified by a path of integers
/// (master seed, generation, phase, candidate, ...). Streams are what make
/// parallel schedules reproduce the sequential result.
inline std::uint64_t stream_seed(std::initializer_list<std::uint64_t> path) {
  std::uint64_t h = 0x6a09e667f3bcc909ULL;
  for (auto v : path) h = splitmix64(h ^ splitmix64(v));
  return h;
}

inline Rng make_stream(std::initializer_list<std::uint64_t> path) { return Rng(stream_seed(path)); }

/// Uniform double in [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Uniform integer in [0, bound).
inline int uniform_index(Rng& rng, int bound) {
  return std::uniform_int_distribution<int>(0, bound - 1)(rng);
}

}  // namespace gsh
