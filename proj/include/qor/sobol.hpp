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
 * @file sobol.hpp
 * @brief Random-access Sobol' points.
 *
 * Direction numbers are the first 16 dimensions of the Joe-Kuo
 * "new-joe-kuo-6.21201" set (dimension 1 is the van der Corput sequence).
 * Points are produced in natural order, x_n = XOR_{k : bit k of n} v_k, not
 * the Gray-code order used by incremental generators, so point n can be
 * computed directly. 32-bit resolution.
 *
 * Optional scrambling is a random digital shift: every coordinate is XORed
 * with a fixed 32-bit word drawn from Rng(scramble_seed).
 */

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "qor/errors.hpp"
#include "qor/rng.hpp"

namespace qor {

class SobolSequence {
 public:
  static constexpr unsigned kMaxDimension = 16;
  static constexpr unsigned kBits = 32;

  explicit SobolSequence(unsigned dimension, std::optional<std::uint64_t> scramble_seed = std::nullopt)
      : dimension_(dimension) {
    if (dimension == 0 || dimension > kMaxDimension) {
      throw InvalidArgument("Sobol' dimension " + std::to_string(dimension) + " unsupported (1.." +
                            std::to_string(kMaxDimension) + ")");
    }
    directions_.resize(dimension);
    for (unsigned d = 0; d < dimension; ++d) directions_[d] = build_directions(d);
    shift_.assign(dimension, 0);
    if (scramble_seed) {
      Rng rng(*scramble_seed);
      for (auto& w : shift_) w = static_cast<std::uint32_t>(rng.next() >> 32);
    }
  }

  unsigned dimension() const noexcept { return dimension_; }

  /// Point with the given index; coordinates in [0, 1).
  std::vector<double> point(std::uint64_t index) const {
    if (index >= (std::uint64_t{1} << kBits)) throw InvalidArgument("Sobol' index must be < 2^32");
    std::vector<double> out(dimension_);
    for (unsigned d = 0; d < dimension_; ++d) {
      std::uint32_t acc = shift_[d];
      for (unsigned k = 0; k < kBits; ++k) {
        if ((index >> k) & 1U) acc ^= directions_[d][k];
      }
      out[d] = static_cast<double>(acc) * 0x1.0p-32;
    }
    return out;
  }

 private:
  struct Primitive {
    unsigned degree;
    unsigned coefficients;
    std::array<std::uint32_t, 6> initial;
  };

  // Joe-Kuo new-joe-kuo-6.21201, dimensions 2..16: s, a, m_1..m_s.
  static constexpr std::array<Primitive, kMaxDimension - 1> kTable{{
      {1, 0, {1}},
      {2, 1, {1, 3}},
      {3, 1, {1, 3, 1}},
      {3, 2, {1, 1, 1}},
      {4, 1, {1, 1, 3, 3}},
      {4, 4, {1, 3, 5, 13}},
      {5, 2, {1, 1, 5, 5, 17}},
      {5, 4, {1, 1, 5, 5, 5}},
      {5, 7, {1, 1, 7, 11, 19}},
      {5, 11, {1, 1, 5, 1, 1}},
      {5, 13, {1, 1, 1, 3, 11}},
      {5, 14, {1, 3, 5, 5, 31}},
      {6, 1, {1, 3, 3, 9, 7, 49}},
      {6, 13, {1, 1, 1, 15, 21, 21}},
      {6, 16, {1, 3, 1, 13, 27, 49}},
  }};

  static std::array<std::uint32_t, kBits> build_directions(unsigned d) {
    std::array<std::uint32_t, kBits> v{};
    if (d == 0) {
      for (unsigned k = 0; k < kBits; ++k) v[k] = std::uint32_t{1} << (kBits - 1 - k);
      return v;
    }
    const Primitive& p = kTable[d - 1];
    const unsigned s = p.degree;
    for (unsigned k = 0; k < s; ++k) v[k] = p.initial[k] << (kBits - 1 - k);
    for (unsigned k = s; k < kBits; ++k) {
      std::uint32_t x = v[k - s] ^ (v[k - s] >> s);
      for (unsigned i = 1; i < s; ++i) {
        if ((p.coefficients >> (s - 1 - i)) & 1U) x ^= v[k - i];
      }
      v[k] = x;
    }
    return v;
  }

  unsigned dimension_;
  std::vector<std::array<std::uint32_t, kBits>> directions_;
  std::vector<std::uint32_t> shift_;
};

}  // namespace qor
