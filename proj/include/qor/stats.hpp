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
 * @file stats.hpp
 * @brief Pearson chi-square goodness of fit.
 */

#include <cstdint>
#include <numeric>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

#include "qor/errors.hpp"

namespace qor::stats {

struct ChiSquareResult {
  double statistic;
  unsigned degrees_of_freedom;
  double p_value;
};

/// Observed counts against expected probabilities (which must sum to 1).
inline ChiSquareResult chi_square(const std::vector<std::uint64_t>& observed, const std::vector<double>& expected) {
  if (observed.size() != expected.size()) throw InvalidArgument("chi_square: size mismatch");
  if (observed.size() < 2) throw InvalidArgument("chi_square: need at least two categories");
  const double total = static_cast<double>(std::accumulate(observed.begin(), observed.end(), std::uint64_t{0}));
  if (total == 0.0) throw InvalidArgument("chi_square: no observations");
  double stat = 0.0;
  for (std::size_t k = 0; k < observed.size(); ++k) {
    if (expected[k] <= 0.0) throw InvalidArgument("chi_square: expected probabilities must be positive");
    const double e = total * expected[k];
    const double d = static_cast<double>(observed[k]) - e;
    stat += d * d / e;
  }
  const auto df = static_cast<unsigned>(observed.size() - 1);
  return {stat, df, boost::math::gamma_q(df / 2.0, stat / 2.0)};
}

inline ChiSquareResult chi_square_uniform(const std::vector<std::uint64_t>& observed) {
  return chi_square(observed, std::vector<double>(observed.size(), 1.0 / static_cast<double>(observed.size())));
}

}  // namespace qor::stats
