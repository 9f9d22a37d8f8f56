#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>

namespace opgan {

/// Bit-reproducible generator used everywhere a seed is consumed.
using Rng = std::mt19937_64;

/// Mixes a base seed with a stream index so independent consumers (layers,
/// epochs, data synthesis) never share a sequence.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Uniform in [0, 1) from the top 53 bits; unlike std::uniform_real_distribution
/// this mapping is fixed across standard libraries.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

/// Standard normal via Box-Muller on uniform01.
inline double standard_normal(Rng& rng) {
  const double u1 = 1.0 - uniform01(rng);  // (0, 1]
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

/// Fisher-Yates with uniform01, same result on every platform.
template <typename It>
void shuffle(It first, It last, Rng& rng) {
  const auto n = last - first;
  for (auto i = n - 1; i > 0; --i) {
    const auto j = static_cast<decltype(i)>(uniform01(rng) * static_cast<double>(i + 1));
    std::iter_swap(first + i, first + j);
  }
}

}  // namespace opgan
