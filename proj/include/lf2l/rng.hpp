// Copyright 2026 The LF2L Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef LF2L_RNG_HPP_
#define LF2L_RNG_HPP_

#include <cstdint>
#include <random>

namespace lf2l {

using RandomEngine = std::mt19937_64;

// Derives an independent seed for a named stream from a base seed
// (splitmix64 finalizer over base ^ stream-mixed constant).
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Uniform double in [0, 1) with 53 random bits.
inline double uniform01(RandomEngine& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace lf2l

#endif  // LF2L_RNG_HPP_
