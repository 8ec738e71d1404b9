#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <utility>

namespace coaltree {

using Rng = std::mt19937_64;

// One SplitMix64 step. Used only to spread seed material before it enters
// the main generator.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Generator for replicate `replicate` of a run seeded with `seed`. The
// stream depends only on (seed, replicate), never on scheduling, so
// replicates may run in any order or on any thread.
inline Rng replicate_rng(std::uint64_t seed, std::uint64_t replicate) {
  std::uint64_t s = seed + 0x9e3779b97f4a7c15ULL * (replicate + 1);
  const std::uint64_t a = splitmix64(s);
  const std::uint64_t b = splitmix64(s);
  std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
  return Rng(seq);
}

// Uniform draw in the open interval (0, 1). Avoiding the endpoints keeps
// log() and division by the result safe.
inline double uniform01(Rng& g) {
  return (static_cast<double>(g() >> 11) + 0.5) * 0x1.0p-53;
}

// Exponential waiting time with the given rate > 0.
inline double exponential(Rng& g, double rate) {
  return -std::log(uniform01(g)) / rate;
}

// Uniform index in {0, ..., n-1}. Rejection keeps the draw exactly uniform.
inline std::size_t uniform_index(Rng& g, std::size_t n) {
  if (n == 0) throw std::invalid_argument("uniform_index: n must be positive");
  const std::uint64_t m = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % m;
  std::uint64_t x;
  do {
    x = g();
  } while (x >= limit);
  return static_cast<std::size_t>(x % m);
}

// Uniform unordered pair {i, j} with 1 <= i < j <= n, returned as (i, j).
inline std::pair<std::size_t, std::size_t> uniform_pair(Rng& g, std::size_t n) {
  if (n < 2) throw std::invalid_argument("uniform_pair: n must be at least 2");
  std::size_t a = uniform_index(g, n) + 1;
  std::size_t b = uniform_index(g, n - 1) + 1;
  if (b >= a) ++b;
  return a < b ? std::make_pair(a, b) : std::make_pair(b, a);
}

}  // namespace coaltree
