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

#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <map>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

#include "qor/qsim.hpp"
#include "qor/stats.hpp"

namespace {

namespace qs = qor::qsim;
namespace sc = qor::scheme;
using Amp = std::complex<double>;

const std::string kFixture = std::string(QOR_DATA_DIR) + "/fixtures/cl167_p311.json";

qs::RegisterLayout procedure_layout(unsigned q) {
  qs::RegisterLayout l;
  l.add("i", q).add("anc", 1).add("j", 9);
  return l;
}

std::vector<Amp> random_state(std::size_t dim, qor::Rng& rng) {
  std::vector<Amp> v(dim);
  double n = 0.0;
  for (auto& a : v) {
    a = Amp(rng.uniform_real() - 0.5, rng.uniform_real() - 0.5);
    n += std::norm(a);
  }
  for (auto& a : v) a /= std::sqrt(n);
  return v;
}

TEST(StateVector, Construction) {
  const qs::StateVector s(procedure_layout(3));
  EXPECT_EQ(s.num_qubits(), 13U);
  EXPECT_EQ(s.amplitude(0), Amp(1.0, 0.0));
  EXPECT_NEAR(s.norm(), 1.0, 1e-15);

  qs::RegisterLayout big;
  big.add("a", 20).add("b", 7);
  EXPECT_THROW(qs::StateVector{big}, qor::ResourceError);
  EXPECT_THROW(qs::StateVector{qs::RegisterLayout{}}, qor::InvalidArgument);

  qs::RegisterLayout dup;
  dup.add("x", 2);
  EXPECT_THROW(dup.add("x", 3), qor::InvalidArgument);
  EXPECT_THROW(dup.add("y", 0), qor::InvalidArgument);
}

TEST(StateVector, LayoutBitOrder) {
  const auto l = procedure_layout(3);
  EXPECT_EQ(l.qubit("i", 0), 0U);
  EXPECT_EQ(l.qubit("anc", 0), 3U);
  EXPECT_EQ(l.qubit("j", 8), 12U);
  qs::StateVector s(l);
  s.set_basis({{"i", 4}, {"j", 236}});
  EXPECT_EQ(s.amplitude((236U << 4) | 4U), Amp(1.0, 0.0));
  EXPECT_EQ(qs::bits_msb_first(236, 9), "011101100");
  EXPECT_EQ(qs::bits_msb_first(4, 3), "100");
  EXPECT_THROW(s.set_basis({{"i", 8}}), qor::InvalidArgument);
}

TEST(Gates, Hadamard) {
  qs::RegisterLayout l;
  l.add("q", 1);
  qs::StateVector s(l);
  s.h(0U);
  EXPECT_NEAR(s.amplitude(0).real(), 1 / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(s.amplitude(1).real(), 1 / std::sqrt(2.0), 1e-15);
  qs::StateVector zero(l);
  EXPECT_NEAR(qs::fidelity(s, zero), 0.5, 1e-12);
  EXPECT_NEAR(qs::fidelity(s, s), 1.0, 1e-12);
  s.h(0U);
  EXPECT_NEAR(qs::fidelity(s, zero), 1.0, 1e-12);
}

TEST(Gates, RxInverseAndNorm) {
  qor::Rng rng(3);
  qs::RegisterLayout l;
  l.add("m", 4);
  qs::StateVector s(l);
  s.set_amplitudes(random_state(16, rng));
  const qs::StateVector before = s;
  for (unsigned q = 0; q < 4; ++q) s.rx(q, 0.37 + q);
  EXPECT_NEAR(s.norm(), 1.0, 1e-12);
  for (unsigned q = 0; q < 4; ++q) s.rx(q, -(0.37 + q));
  EXPECT_NEAR(qs::fidelity(s, before), 1.0, 1e-12);
}

TEST(Gates, RxMatchesDenseMatrix) {
  qs::RegisterLayout l;
  l.add("q", 1);
  qs::StateVector s(l);
  const double t = 1.1;
  s.rx(0U, t);
  EXPECT_NEAR(std::abs(s.amplitude(0) - Amp(std::cos(t / 2), 0)), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(s.amplitude(1) - Amp(0, -std::sin(t / 2))), 0.0, 1e-15);
}

TEST(Gates, ControlledGates) {
  qs::RegisterLayout l;
  l.add("q", 3);
  qs::StateVector s(l);
  s.x(0U);
  s.cx(0, 2);
  EXPECT_EQ(s.amplitude(0b101), Amp(1.0, 0.0));
  s.x(1U);
  s.mcp(0.8, {0, 1}, 2);
  EXPECT_NEAR(std::abs(s.amplitude(0b111) - std::polar(1.0, 0.8)), 0.0, 1e-15);
  s.phase(1, 0.2);
  EXPECT_NEAR(std::arg(s.amplitude(0b111)), 1.0, 1e-12);

  qs::StateVector t(l);
  t.mcp(0.8, {0, 1}, 2);
  EXPECT_EQ(t.amplitude(0), Amp(1.0, 0.0));
  EXPECT_THROW(t.h(3U), qor::InvalidArgument);
  EXPECT_THROW(t.cx(1, 1), qor::InvalidArgument);
  EXPECT_THROW(t.mcp(0.1, {2}, 2), qor::InvalidArgument);
}

// ---------------------------------------------------------------------------
// Permutations

TEST(Permutation, FixtureShift) {
  const auto table = sc::load_action_table(kFixture);
  const auto e = qs::PermutationGate::from_action(sc::make_action(table, "e"), 9);
  qs::StateVector s(procedure_layout(3));
  s.set_basis({{"j", 1}});
  s.apply_permutation(e, "j");
  EXPECT_EQ(s.amplitude(209U << 4), Amp(1.0, 0.0));
  s.apply_permutation(e.inverse(), "j");
  EXPECT_EQ(s.amplitude(1U << 4), Amp(1.0, 0.0));
  EXPECT_THROW(s.apply_permutation(qs::PermutationGate::identity(3), "j"), qor::InvalidArgument);
  EXPECT_THROW(qs::PermutationGate::from_action(sc::make_action(table, "e"), 8), qor::InvalidArgument);
  EXPECT_THROW(qs::PermutationGate(2, {0, 1, 1, 3}), qor::InvalidArgument);
}

TEST(Permutation, IdentityAndRoundTrip) {
  qor::Rng rng(11);
  const auto table = sc::load_action_table(kFixture);
  const auto c = qs::PermutationGate::from_action(sc::make_action(table, "c"), 9);
  qs::StateVector s(procedure_layout(2));
  s.set_amplitudes(random_state(s.size(), rng));
  const qs::StateVector before = s;
  s.apply_permutation(qs::PermutationGate::identity(9), "j");
  EXPECT_NEAR(qs::fidelity(s, before), 1.0, 1e-12);
  s.apply_permutation(c, "j");
  s.apply_permutation(c.inverse(), "j");
  for (std::size_t k = 0; k < s.size(); ++k) EXPECT_LT(std::abs(s.amplitude(k) - before.amplitude(k)), 1e-12);
}

TEST(Permutation, RemapAgreesWithDenseMatrix) {
  qor::Rng rng(5);
  qs::RegisterLayout l;
  l.add("a", 2).add("r", 4);
  std::vector<std::uint32_t> map(16);
  for (std::uint32_t x = 0; x < 16; ++x) map[x] = (7 * x + 3) % 16;
  const qs::PermutationGate g(4, map);

  qs::StateVector s(l);
  const auto init = random_state(64, rng);
  s.set_amplitudes(init);
  s.apply_permutation(g, "r");

  // Dense oracle: P_r (x) I_a with basis index = a + 4 r.
  Eigen::MatrixXcd dense = Eigen::MatrixXcd::Zero(64, 64);
  for (std::uint32_t r = 0; r < 16; ++r)
    for (std::uint32_t a = 0; a < 4; ++a) dense(a + 4 * map[r], a + 4 * r) = 1.0;
  const Eigen::VectorXcd expected = dense * Eigen::Map<const Eigen::VectorXcd>(init.data(), 64);
  for (std::size_t k = 0; k < 64; ++k) EXPECT_LT(std::abs(s.amplitude(k) - expected(static_cast<long>(k))), 1e-14);
}

TEST(Permutation, ControlledCascadeIsPowerOfIndex) {
  const auto table = sc::load_action_table(kFixture);
  const auto e_action = sc::make_action(table, "e");
  const auto e = qs::PermutationGate::from_action(e_action, 9);
  const auto layout = procedure_layout(3);
  for (std::uint64_t i = 0; i < 8; ++i) {
    for (sc::Residue j : table->j_set()) {
      qs::StateVector s(layout);
      s.set_basis({{"i", i}, {"j", j}});
      s.apply_controlled_permutation(qs::repeated_squaring_schedule(e, layout.qubits("i")), "j");
      const std::size_t expected = i | (static_cast<std::size_t>(sc::act(e_action, j, static_cast<long long>(i))) << 4);
      EXPECT_EQ(s.amplitude(expected), Amp(1.0, 0.0)) << "i=" << i << " j=" << j;
    }
  }
}

TEST(Permutation, MapperWorkedExample) {
  const auto table = sc::load_action_table(kFixture);
  const auto e = qs::PermutationGate::from_action(sc::make_action(table, "e"), 9);
  const auto layout = procedure_layout(3);
  qs::StateVector s(layout);
  s.set_basis({{"i", 4}, {"j", 1}});
  s.apply_permutation(e, "j");
  s.apply_permutation(e, "j");
  EXPECT_EQ(s.amplitude(4U | (307U << 4)), Amp(1.0, 0.0));
  const auto sched = qs::repeated_squaring_schedule(e, layout.qubits("i"));
  s.apply_controlled_permutation(sched, "j");
  EXPECT_EQ(s.amplitude(4U | (193U << 4)), Amp(1.0, 0.0));

  qs::StateVector i0(layout);
  i0.set_basis({{"j", 307}});
  i0.apply_controlled_permutation(sched, "j");
  EXPECT_EQ(i0.amplitude(307U << 4), Amp(1.0, 0.0));
}

TEST(Permutation, RepeatedSquaringEqualsNaiveSchedule) {
  qor::Rng rng(17);
  const auto table = sc::load_action_table(kFixture);
  const auto b = qs::PermutationGate::from_action(sc::make_action(table, "b"), 9);
  const auto layout = procedure_layout(4);
  qs::StateVector s1(layout);
  s1.set_amplitudes(random_state(s1.size(), rng));
  qs::StateVector s2 = s1;
  const qs::StateVector before = s1;
  const auto rsq = qs::repeated_squaring_schedule(b, layout.qubits("i"));
  const auto naive = qs::naive_shift_schedule(b, layout.qubits("i"));
  EXPECT_EQ(naive.size(), 15U);
  s1.apply_controlled_permutation(rsq, "j");
  s2.apply_controlled_permutation(naive, "j");
  for (std::size_t k = 0; k < s1.size(); ++k) EXPECT_LT(std::abs(s1.amplitude(k) - s2.amplitude(k)), 1e-12);

  std::vector<qs::ControlledStage> undo;
  for (auto it = rsq.rbegin(); it != rsq.rend(); ++it) undo.push_back({it->control, it->gate.inverse()});
  s1.apply_controlled_permutation(undo, "j");
  EXPECT_NEAR(qs::fidelity(s1, before), 1.0, 1e-12);
}

// ---------------------------------------------------------------------------
// Comparator and amplitude filter

TEST(Filter, ComparatorMarks) {
  const auto layout = procedure_layout(3);
  const qs::Qubit anc = layout.qubit("anc", 0);
  for (std::uint64_t i = 0; i < 8; ++i) {
    qs::StateVector s(layout);
    s.set_basis({{"i", i}});
    s.comparator_mark(5, "i", anc);
    EXPECT_EQ(s.amplitude(i | (i < 5 ? 8U : 0U)), Amp(1.0, 0.0));
    s.comparator_mark(5, "i", anc);
    EXPECT_EQ(s.amplitude(i), Amp(1.0, 0.0));
    qs::StateVector all(layout);
    all.set_basis({{"i", i}});
    all.comparator_mark(8, "i", anc);
    EXPECT_EQ(all.amplitude(i | 8U), Amp(1.0, 0.0));
  }
  qs::StateVector s(layout);
  EXPECT_THROW(s.comparator_mark(0, "i", anc), qor::InvalidArgument);
  EXPECT_THROW(s.comparator_mark(9, "i", anc), qor::InvalidArgument);
}

double filter_residual(unsigned q, std::uint64_t omega) {
  qs::RegisterLayout l;
  l.add("i", q).add("anc", 1);
  qs::StateVector s(l);
  s.h(l.qubits("i"));
  s.grover_filter(omega, "i", l.qubit("anc", 0));
  // Total variation between the post-filter distribution and the target.
  double tv = 0.0;
  for (std::size_t k = 0; k < s.size(); ++k) {
    const bool good = (k >> q) == 0 && (k & ((1U << q) - 1)) < omega;
    const double target = good ? 1.0 / static_cast<double>(omega) : 0.0;
    tv += std::abs(std::norm(s.amplitude(k)) - target);
  }
  return tv / 2.0;
}

TEST(Filter, ExactForQ3Omega5) {
  EXPECT_NEAR(qs::StateVector::filter_angle(5, 3), std::acos(0.2), 1e-15);
  EXPECT_LT(filter_residual(3, 5), 1e-6);

  qs::RegisterLayout l;
  l.add("i", 3).add("anc", 1);
  qs::StateVector s(l);
  s.h(l.qubits("i"));
  s.grover_filter(5, "i", 3);
  // Equal amplitudes up to a global phase.
  const Amp ref = s.amplitude(0);
  for (std::size_t k = 0; k < 5; ++k) EXPECT_LT(std::abs(s.amplitude(k) - ref), 1e-9);
  EXPECT_NEAR(std::abs(ref), 1 / std::sqrt(5.0), 1e-9);
  std::vector<Amp> zero{1.0, 0.0};
  EXPECT_NEAR(s.register_fidelity("anc", zero), 1.0, 1e-9);
}

TEST(Filter, ExactAboveHalf) {
  EXPECT_NEAR(qs::StateVector::filter_angle(6, 3), std::acos(1.0 - 8.0 / 12.0), 1e-15);
  for (unsigned q = 1; q <= 6; ++q) {
    for (std::uint64_t omega = (std::uint64_t{1} << (q - 1)) + 1; omega < (std::uint64_t{1} << q); ++omega) {
      EXPECT_LT(filter_residual(q, omega), 1e-9) << "Q=" << q << " Omega=" << omega;
    }
  }
}

TEST(Filter, NoOpAndPreconditions) {
  qs::RegisterLayout l;
  l.add("i", 3).add("anc", 1);
  qs::StateVector s(l);
  s.h(l.qubits("i"));
  const qs::StateVector before = s;
  s.grover_filter(8, "i", 3);
  EXPECT_NEAR(qs::fidelity(s, before), 1.0, 1e-15);
  EXPECT_THROW(s.grover_filter(4, "i", 3), qor::InvalidArgument);
  qs::StateVector basis(l);
  EXPECT_THROW(basis.grover_filter(5, "i", 3), qor::InvalidArgument);
  qs::StateVector dirty = before;
  dirty.x(3U);
  EXPECT_THROW(dirty.grover_filter(5, "i", 3), qor::InvalidArgument);
}

TEST(Filter, PrepareUniform) {
  qs::RegisterLayout l;
  l.add("i", 4).add("j", 2);
  qs::StateVector s(l);
  s.set_basis({{"j", 2}});
  s.prepare_uniform("i", 11);
  const auto m = s.marginal({"i"});
  for (std::size_t i = 0; i < 16; ++i) EXPECT_NEAR(m[i], i < 11 ? 1.0 / 11 : 0.0, 1e-12);
  EXPECT_NEAR(s.marginal({"j"})[2], 1.0, 1e-12);
  EXPECT_THROW(s.prepare_uniform("i", 3), qor::InvalidArgument);
}

// ---------------------------------------------------------------------------
// Measurement

TEST(Measure, BasisStateUnchanged) {
  qor::Rng rng(1);
  qs::StateVector s(procedure_layout(3));
  const qs::StateVector before = s;
  const auto r = s.measure({"i", "anc", "j"}, rng);
  EXPECT_EQ(r.values, (std::vector<std::uint64_t>{0, 0, 0}));
  EXPECT_NEAR(r.probability, 1.0, 1e-15);
  EXPECT_NEAR(qs::fidelity(s, before), 1.0, 1e-15);
}

TEST(Measure, CollapseAndRenormalise) {
  qor::Rng rng(2);
  qs::RegisterLayout l;
  l.add("a", 1).add("b", 1);
  qs::StateVector s(l);
  s.h(0U);
  s.cx(0, 1);
  const auto r = s.measure({"a"}, rng);
  EXPECT_NEAR(r.probability, 0.5, 1e-12);
  EXPECT_NEAR(s.norm(), 1.0, 1e-12);
  const std::size_t k = r.values[0] ? 3 : 0;
  EXPECT_NEAR(std::norm(s.amplitude(k)), 1.0, 1e-12);
}

TEST(Measure, DeterministicPerSeed) {
  auto run = [](std::uint64_t seed) {
    qor::Rng rng(seed);
    qs::RegisterLayout l;
    l.add("q", 5);
    std::vector<std::uint64_t> out;
    for (int k = 0; k < 50; ++k) {
      qs::StateVector s(l);
      s.h(l.qubits("q"));
      out.push_back(s.measure({"q"}, rng).values[0]);
    }
    return out;
  };
  EXPECT_EQ(run(9), run(9));
  EXPECT_NE(run(9), run(10));
}

TEST(Measure, UniformTwoQubitBornRule) {
  qor::Rng rng(2024);
  qs::RegisterLayout l;
  l.add("q", 2);
  qs::StateVector prepared(l);
  prepared.h(l.qubits("q"));
  std::vector<std::uint64_t> counts(4, 0);
  constexpr int kShots = 100000;
  for (int shot = 0; shot < kShots; ++shot) {
    qs::StateVector s = prepared;
    ++counts[s.measure({"q"}, rng).values[0]];
  }
  const double sigma = std::sqrt(kShots * 0.25 * 0.75);
  for (auto c : counts) EXPECT_LT(std::abs(static_cast<double>(c) - 25000.0), 5 * sigma);
  EXPECT_GT(qor::stats::chi_square_uniform(counts).p_value, 1e-3);
}

TEST(Measure, FidelityLayoutMismatch) {
  qs::RegisterLayout a, b;
  a.add("x", 2);
  b.add("y", 2);
  EXPECT_THROW(qs::fidelity(qs::StateVector(a), qs::StateVector(b)), qor::InvalidArgument);
  qs::StateVector s1(a), s2(a);
  s2.x(0U);
  EXPECT_EQ(qs::fidelity(s1, s2), 0.0);
}

}  // namespace
