/*
 * Copyright 2026 The fedicu Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Seeded sampling helpers. The standard distributions are implementation
// defined, so everything that feeds a reproducibility guarantee goes through
// these instead.

#ifndef FEDICU_RANDOM_H_
#define FEDICU_RANDOM_H_

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <utility>

namespace fedicu {

using RandomEngine = std::mt19937_64;

// SplitMix64 finalizer; used to derive independent sub-seeds.
inline std::uint64_t MixSeed(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::uint64_t DeriveSeed(std::uint64_t seed, std::uint64_t stream) {
  return MixSeed(seed ^ MixSeed(stream));
}

// Uniform in [0, 1).
inline double UniformUnit(RandomEngine& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double UniformReal(RandomEngine& rng, double lo, double hi) {
  return lo + (hi - lo) * UniformUnit(rng);
}

// Uniform in [0, n). n must be positive.
inline std::uint64_t UniformIndex(RandomEngine& rng, std::uint64_t n) {
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
  std::uint64_t r;
  do {
    r = rng();
  } while (r >= limit);
  return r % n;
}

// Box-Muller; discards the second variate to stay stateless.
inline double StandardNormal(RandomEngine& rng) {
  double u1;
  do {
    u1 = UniformUnit(rng);
  } while (u1 <= 0.0);
  const double u2 = UniformUnit(rng);
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

// Fisher-Yates.
template <typename T>
void Shuffle(std::span<T> values, RandomEngine& rng) {
  for (std::size_t i = values.size(); i > 1; --i) {
    const std::size_t j = UniformIndex(rng, i);
    std::swap(values[i - 1], values[j]);
  }
}

}  // namespace fedicu

#endif  // FEDICU_RANDOM_H_
