#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace hyperppo {

using Rng = std::mt19937_64;

// Uniform in [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

// Box-Muller without a cached second draw, so the generator state alone fully
// determines the stream.
double standard_normal(Rng& rng);

// Derives an independent seed from a base seed and a tuple of stream ids.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0);

std::string rng_to_string(const Rng& rng);
Rng rng_from_string(const std::string& text);

}  // namespace hyperppo
