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
 * @file classgroup.hpp
 * @brief Form class group of a negative discriminant.
 *
 * Elements are primitive positive definite binary quadratic forms
 * a x^2 + b xy + c y^2 with b^2 - 4ac = D < 0. Every class has exactly one
 * reduced representative:
 *
 *     |b| <= a <= c,  and  b >= 0 whenever |b| = a or a = c.
 *
 * Composition is the classical Dirichlet composition (general gcd case)
 * followed by Gauss reduction. Everything is templated on the integer type;
 * the default is boost::multiprecision::cpp_int so that intermediate
 * products never overflow.
 */

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <numeric>
#include <type_traits>
#include <ostream>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "qor/errors.hpp"
#include "qor/rng.hpp"

namespace qor::classgroup {

using Integer = boost::multiprecision::cpp_int;

namespace detail {

template <class Int>
Int floor_div(const Int& x, const Int& y) {
  Int q = x / y;
  if ((x % y != 0) && ((x < 0) != (y < 0))) q -= 1;
  return q;
}

template <class Int>
Int floor_mod(const Int& x, const Int& y) {
  return x - y * floor_div(x, y);
}

template <class Int>
Int abs(const Int& x) {
  return x < 0 ? Int(-x) : x;
}

template <class Int>
Int gcd(Int x, Int y) {
  x = abs(x);
  y = abs(y);
  while (y != 0) {
    Int t = x % y;
    x = y;
    y = t;
  }
  return x;
}

/// Returns (g, u, v) with u*x + v*y = g = gcd(x, y) >= 0.
template <class Int>
std::tuple<Int, Int, Int> ext_gcd(const Int& x, const Int& y) {
  Int r0 = x, r1 = y, s0 = 1, s1 = 0, t0 = 0, t1 = 1;
  while (r1 != 0) {
    Int q = r0 / r1;
    Int tmp = r0 - q * r1;
    r0 = r1;
    r1 = tmp;
    tmp = s0 - q * s1;
    s0 = s1;
    s1 = tmp;
    tmp = t0 - q * t1;
    t0 = t1;
    t1 = tmp;
  }
  if (r0 < 0) return {Int(-r0), Int(-s0), Int(-t0)};
  return {r0, s0, t0};
}

}  // namespace detail

/// A negative discriminant, D = 0 or 1 (mod 4).
template <class Int = Integer>
class BasicDiscriminant {
 public:
  explicit BasicDiscriminant(Int value) : value_(std::move(value)) {
    if (value_ >= 0) throw InvalidArgument("discriminant must be negative");
    const Int r = detail::floor_mod(value_, Int(4));
    if (r != 0 && r != 1) throw InvalidArgument("discriminant must be 0 or 1 mod 4");
  }

  const Int& value() const noexcept { return value_; }
  friend bool operator==(const BasicDiscriminant&, const BasicDiscriminant&) = default;

 private:
  Int value_;
};

/// Positive definite binary quadratic form (a, b, c).
template <class Int = Integer>
class BasicQuadraticForm {
 public:
  BasicQuadraticForm(Int a, Int b, Int c) : a_(std::move(a)), b_(std::move(b)), c_(std::move(c)) {
    if (a_ <= 0 || c_ <= 0) throw InvalidArgument("form " + to_string() + " is not positive definite");
    if (discriminant_value() >= 0) {
      throw InvalidArgument("form " + to_string() + " has non-negative discriminant");
    }
  }

  /// The form (a, b, (b^2 - D) / 4a); throws if 4a does not divide b^2 - D.
  static BasicQuadraticForm from_ab(const Int& a, const Int& b, const BasicDiscriminant<Int>& d) {
    if (a <= 0) throw InvalidArgument("leading coefficient must be positive");
    const Int num = b * b - d.value();
    if (num % (4 * a) != 0) throw InvalidArgument("b^2 - D not divisible by 4a");
    return BasicQuadraticForm(a, b, num / (4 * a));
  }

  const Int& a() const noexcept { return a_; }
  const Int& b() const noexcept { return b_; }
  const Int& c() const noexcept { return c_; }

  Int discriminant_value() const { return b_ * b_ - 4 * a_ * c_; }
  BasicDiscriminant<Int> discriminant() const { return BasicDiscriminant<Int>(discriminant_value()); }

  bool is_reduced() const {
    const Int ab = detail::abs(b_);
    if (!(ab <= a_ && a_ <= c_)) return false;
    if ((ab == a_ || a_ == c_) && b_ < 0) return false;
    return true;
  }

  std::string to_string() const {
    std::ostringstream os;
    os << '(' << a_ << ',' << b_ << ',' << c_ << ')';
    return os.str();
  }

  friend bool operator==(const BasicQuadraticForm&, const BasicQuadraticForm&) = default;
  friend bool operator<(const BasicQuadraticForm& x, const BasicQuadraticForm& y) {
    return std::tie(x.a_, x.b_, x.c_) < std::tie(y.a_, y.b_, y.c_);
  }
  friend std::ostream& operator<<(std::ostream& os, const BasicQuadraticForm& f) { return os << f.to_string(); }

 private:
  Int a_, b_, c_;
};

using Discriminant = BasicDiscriminant<Integer>;
using QuadraticForm = BasicQuadraticForm<Integer>;

/// Largest |D| accepted by class_number / enumerate_reduced.
inline constexpr std::int64_t kEnumerationGuard = 10'000'000;
/// Largest group order accepted by the trial-division primality check.
inline constexpr std::uint64_t kPrimalityGuard = 1'000'000'000'000ULL;

/// The identity class: (1, 0, -D/4) or (1, 1, (1-D)/4).
template <class Int>
BasicQuadraticForm<Int> principal_form(const BasicDiscriminant<Int>& d) {
  const Int b = detail::floor_mod(d.value(), Int(2)) == 0 ? Int(0) : Int(1);
  return BasicQuadraticForm<Int>::from_ab(Int(1), b, d);
}

/// Gauss reduction to the unique reduced representative.
template <class Int>
BasicQuadraticForm<Int> reduce(const BasicQuadraticForm<Int>& f) {
  const Int disc = f.discriminant_value();
  if (disc >= 0) throw InvalidArgument("reduce: form is not positive definite");
  Int a = f.a(), b = f.b(), c = f.c();
  for (;;) {
    if (b > a || b <= -a) {
      // shift b into (-a, a] with x -> x + k y
      const Int two_a = 2 * a;
      const Int k = detail::floor_div(Int(a - b), two_a);
      b += two_a * k;
      c = (b * b - disc) / (4 * a);
    }
    if (a > c) {
      std::swap(a, c);
      b = -b;
      continue;
    }
    if (a == c && b < 0) b = -b;
    return BasicQuadraticForm<Int>(a, b, c);
  }
}

/// Composite class of f and g, reduced.
template <class Int>
BasicQuadraticForm<Int> compose(const BasicQuadraticForm<Int>& f, const BasicQuadraticForm<Int>& g) {
  const Int disc = f.discriminant_value();
  if (disc != g.discriminant_value()) {
    throw InvalidArgument("compose: discriminant mismatch " + f.to_string() + " vs " + g.to_string());
  }
  const Int& a1 = f.a();
  const Int& b1 = f.b();
  const Int& a2 = g.a();
  const Int& b2 = g.b();
  const Int s = (b1 + b2) / 2;  // b1, b2 share parity with D

  // e = gcd(a1, a2, s) = x a1 + y a2 + z s
  auto [d1, u, v] = detail::ext_gcd(a1, a2);
  auto [e, p, z] = detail::ext_gcd(d1, s);
  const Int x = p * u;
  const Int y = p * v;

  const Int a3 = (a1 * a2) / (e * e);
  Int b3 = (x * a1 * b2 + y * a2 * b1 + z * (b1 * b2 + disc) / 2) / e;
  b3 = detail::floor_mod(b3, Int(2 * a3));
  const Int c3 = (b3 * b3 - disc) / (4 * a3);
  return reduce(BasicQuadraticForm<Int>(a3, b3, c3));
}

/// Inverse class: the opposite form (a, -b, c), reduced.
template <class Int>
BasicQuadraticForm<Int> inverse(const BasicQuadraticForm<Int>& f) {
  return reduce(BasicQuadraticForm<Int>(f.a(), Int(-f.b()), f.c()));
}

/// f^n by repeated squaring, O(log n) compositions.
template <class Int>
BasicQuadraticForm<Int> power(const BasicQuadraticForm<Int>& f, const Int& n) {
  if (n < 0) throw InvalidArgument("power: negative exponent");
  auto result = principal_form(f.discriminant());
  auto square = reduce(f);
  Int rest = n;
  while (rest > 0) {
    if (rest % 2 != 0) result = compose(result, square);
    rest /= 2;
    if (rest > 0) square = compose(square, square);
  }
  return result;
}

template <class Int, std::integral N>
BasicQuadraticForm<Int> power(const BasicQuadraticForm<Int>& f, N n) {
  if constexpr (std::is_signed_v<N>) {
    if (n < 0) throw InvalidArgument("power: negative exponent");
  }
  return power(f, Int(n));
}

/// All primitive reduced forms of discriminant d, sorted by (a, b).
template <class Int>
std::vector<BasicQuadraticForm<Int>> enumerate_reduced(const BasicDiscriminant<Int>& d) {
  if (detail::abs(d.value()) > kEnumerationGuard) {
    throw ResourceError("|D| exceeds the enumeration guard of " + std::to_string(kEnumerationGuard));
  }
  const auto disc = static_cast<std::int64_t>(d.value());
  std::vector<BasicQuadraticForm<Int>> out;
  for (std::int64_t a = 1; 3 * a * a <= -disc; ++a) {
    for (std::int64_t b = -a + 1; b <= a; ++b) {
      if (((b - disc) & 1) != 0) continue;
      const std::int64_t num = b * b - disc;
      if (num % (4 * a) != 0) continue;
      const std::int64_t c = num / (4 * a);
      if (c < a) continue;
      if (a == c && b < 0) continue;
      if (std::gcd(std::gcd(a, b < 0 ? -b : b), c) != 1) continue;
      out.emplace_back(Int(a), Int(b), Int(c));
    }
  }
  return out;
}

/// h(D): number of reduced primitive forms.
template <class Int>
std::uint64_t class_number(const BasicDiscriminant<Int>& d) {
  return enumerate_reduced(d).size();
}

/// Deterministic trial division; throws ResourceError beyond kPrimalityGuard.
inline bool is_prime(std::uint64_t n) {
  if (n > kPrimalityGuard) throw ResourceError("primality guard exceeded");
  if (n < 2) return false;
  if (n % 2 == 0) return n == 2;
  for (std::uint64_t q = 3; q * q <= n; q += 2) {
    if (n % q == 0) return false;
  }
  return true;
}

/// k = C * ceil(log2 r) exponents for a group of order r.
inline unsigned default_num_exponents(std::uint64_t r, unsigned multiplier = 3) {
  unsigned bits = 0;
  while ((std::uint64_t{1} << bits) < r) ++bits;
  return multiplier * std::max(1U, bits);
}

template <class Int = Integer>
struct BasicRandomElementParams {
  BasicQuadraticForm<Int> generator;
  std::uint64_t group_order;  ///< r, prime
  unsigned num_exponents;     ///< k
  unsigned word_length;       ///< m
  std::uint64_t seed;
  /// When non-empty, replaces the drawn exponents c_1..c_k (size must be k).
  std::vector<std::uint64_t> forced_exponents{};
};

template <class Int = Integer>
struct BasicRandomElement {
  std::uint64_t exponent;                ///< e = sum of the word letters mod r
  BasicQuadraticForm<Int> element;       ///< generator^e
  std::vector<std::uint64_t> exponents;  ///< c_1..c_k
  std::vector<unsigned> word;            ///< s_1..s_m, indices into exponents
};

using RandomElementParams = BasicRandomElementParams<Integer>;
using RandomElement = BasicRandomElement<Integer>;

/**
 * Random class-group element g^e.
 *
 * Draw order from Rng(seed): k exponents c_i = 1 + uniform_below(r - 1)
 * (skipped when forced), then m letters s_l = uniform_below(k). The exponent
 * is e = c_{s_1} + ... + c_{s_m} mod r.
 */
template <class Int>
BasicRandomElement<Int> random_element(const BasicRandomElementParams<Int>& params) {
  const std::uint64_t r = params.group_order;
  if (!is_prime(r)) throw InvalidArgument("random_element: group order " + std::to_string(r) + " is not prime");
  if (params.num_exponents == 0) throw InvalidArgument("random_element: k must be >= 1");
  if (params.word_length == 0) throw InvalidArgument("random_element: m must be >= 1");
  if (!params.forced_exponents.empty() && params.forced_exponents.size() != params.num_exponents) {
    throw InvalidArgument("random_element: forced exponent count differs from k");
  }

  Rng rng(params.seed);
  std::vector<std::uint64_t> exps;
  if (params.forced_exponents.empty()) {
    exps.reserve(params.num_exponents);
    for (unsigned i = 0; i < params.num_exponents; ++i) exps.push_back(1 + rng.uniform_below(r - 1));
  } else {
    exps = params.forced_exponents;
  }

  std::vector<unsigned> word;
  word.reserve(params.word_length);
  std::uint64_t e = 0;
  for (unsigned l = 0; l < params.word_length; ++l) {
    const auto s = static_cast<unsigned>(rng.uniform_below(params.num_exponents));
    word.push_back(s);
    e = (e + exps[s] % r) % r;
  }
  return {e, power(params.generator, Int(e)), std::move(exps), std::move(word)};
}

}  // namespace qor::classgroup
