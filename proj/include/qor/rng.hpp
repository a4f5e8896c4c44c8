// Copyright 2026 The QOR Simulator Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

/**
 * @file rng.hpp
 * @brief Reproducible pseudorandom source.
 *
 * Every random draw in the library goes through Rng, which wraps the
 * MT19937-64 engine (std::mt19937_64, whose output sequence is fixed by the
 * C++ standard). The std::*_distribution adaptors are implementation
 * defined, so the mappings from raw 64-bit words to values are spelled out
 * here instead:
 *
 *  - uniform_below(n): rejection sampling. Words >= 2^64 - (2^64 mod n) are
 *    discarded, the accepted word is reduced mod n.
 *  - uniform_real(): the top 53 bits of one word times 2^-53, in [0, 1).
 *
 * Per-shot seeds are derived from a run seed with SplitMix64 so that shot k
 * of a run is independent of how many shots precede it.
 */

#include <cstdint>
#include <random>
#include <stdexcept>

namespace qor {

/// One SplitMix64 step applied to `x` (Steele, Lea, Flood 2014 constants).
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Seed of shot `shot` within a run seeded by `run_seed`.
constexpr std::uint64_t shot_seed(std::uint64_t run_seed, std::uint64_t shot) noexcept {
  return splitmix64(run_seed ^ splitmix64(shot));
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed), seed_(seed) {}

  std::uint64_t next() {
    ++draws_;
    return engine_();
  }

  /// Uniform integer in [0, n).
  std::uint64_t uniform_below(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("uniform_below: empty range");
    const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % n + 1) % n;
    for (;;) {
      const std::uint64_t x = next();
      if (x <= limit) return x % n;
    }
  }

  /// Uniform double in [0, 1).
  double uniform_real() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  std::uint64_t seed() const noexcept { return seed_; }
  /// Number of raw words consumed so far.
  std::uint64_t draws() const noexcept { return draws_; }

 private:
  std::mt19937_64 engine_;
  std::uint64_t seed_;
  std::uint64_t draws_ = 0;
};

}  // namespace qor
