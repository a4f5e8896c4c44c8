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

// Acceptance suite: one PASS/FAIL line per criterion, exit status 0 iff all pass.

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/MatrixFunctions>

#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "qor/attacks.hpp"
#include "qor/classgroup.hpp"
#include "qor/cli.hpp"
#include "qor/protocol.hpp"
#include "qor/qsim.hpp"
#include "qor/scheme.hpp"

namespace {

namespace cg = qor::classgroup;
namespace sc = qor::scheme;
namespace qs = qor::qsim;
namespace pr = qor::protocol;
namespace fs = std::filesystem;
using Complex = std::complex<double>;

const std::string kData = QOR_DATA_DIR;
const std::string kFixture = kData + "/fixtures/cl167_p311.json";
const std::vector<std::string> kFive = {"a", "b", "c", "d", "e"};
constexpr std::uint64_t kShots = 10000;

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), {}};
}

pr::Context demo_context() { return pr::make_context(sc::load_action_table(kFixture), kFive, {}); }

// The demo run is shared by criteria 3 and 4.
std::optional<pr::Procedure3Result> g_demo;

Outcome class_number() {
  std::ostringstream out, err;
  const int code = qor::cli::run_cli({"classgroup", "class-number", "-167"}, out, err);
  return {code == 0 && out.str() == "11\n", "qor classgroup class-number -167 printed '" +
                                                out.str().substr(0, out.str().find('\n')) + "'"};
}

Outcome group_axioms() {
  const cg::Discriminant d(cg::Integer(-167));
  const auto forms = cg::enumerate_reduced(d);
  const std::size_t r = forms.size();
  std::map<cg::QuadraticForm, std::size_t> index;
  for (std::size_t k = 0; k < r; ++k) index[forms[k]] = k;
  std::vector<std::vector<std::size_t>> table(r, std::vector<std::size_t>(r));
  bool closure = true;
  for (std::size_t x = 0; x < r; ++x) {
    for (std::size_t y = 0; y < r; ++y) {
      const auto it = index.find(cg::compose(forms[x], forms[y]));
      if (it == index.end()) {
        closure = false;
        continue;
      }
      table[x][y] = it->second;
    }
  }
  if (!closure) return {false, "a product left the set of reduced forms"};
  bool assoc = true;
  for (std::size_t x = 0; x < r; ++x)
    for (std::size_t y = 0; y < r; ++y)
      for (std::size_t z = 0; z < r; ++z) assoc &= table[table[x][y]][z] == table[x][table[y][z]];
  const std::size_t e = index.at(cg::principal_form(d));
  bool identity = true, inverses = true;
  for (std::size_t x = 0; x < r; ++x) {
    identity &= table[x][e] == x && table[e][x] == x;
    bool has = false;
    for (std::size_t y = 0; y < r; ++y) has |= table[x][y] == e && table[y][x] == e;
    inverses &= has;
  }
  return {r == 11 && assoc && identity && inverses,
          std::to_string(r) + "x" + std::to_string(r) + " table; closure, associativity (" +
              std::to_string(r * r * r) + " triples), identity, inverses"};
}

Outcome demo_recovery() {
  pr::Procedure3Params p;
  p.omega = 2;
  p.Omega = 5;
  p.message = pr::basis_message("0101");
  p.seed = 2026;
  p.shots = kShots;
  g_demo = pr::run_procedure3(demo_context(), p);
  std::uint64_t ok = 0;
  double min_fid = 1.0;
  for (const auto& s : g_demo->shots) {
    ok += s.recovered == 213 ? 1 : 0;
    min_fid = std::min(min_fid, s.message_fidelity);
  }
  return {ok == kShots, std::to_string(ok) + "/" + std::to_string(kShots) +
                            " shots recovered 213; min message fidelity " + fmt("%.12f", min_fid)};
}

Outcome first_measurement_uniformity() {
  if (!g_demo) return {false, "demo run missing"};
  const auto h = g_demo->raw_histogram();
  std::vector<std::uint64_t> counts;
  bool band = true;
  std::string detail;
  for (const auto& [k, v] : h) {
    counts.push_back(v);
    band &= v >= 1800 && v <= 2200;
    detail += "'" + k + "':" + std::to_string(v) + " ";
  }
  if (counts.size() != 5) return {false, std::to_string(counts.size()) + " distinct outcomes: " + detail};
  const auto chi = qor::stats::chi_square_uniform(counts);
  return {band && chi.p_value > 0.001, detail + "chi-square p = " + fmt("%.4f", chi.p_value)};
}

Outcome grover_filter() {
  const double theta = qs::StateVector::filter_angle(5, 3);
  qs::RegisterLayout l;
  l.add("i", 3).add("anc", 1);
  qs::StateVector s(l);
  s.h(l.qubits("i"));
  s.grover_filter(5, "i", l.qubit("anc", 0));
  // Total variation between |psi|^2 and the uniform distribution on i < 5 with anc = 0,
  // plus the amplitude distance after removing the global phase.
  double tv = 0.0;
  const Complex phase = s.amplitude(0) / std::abs(s.amplitude(0));
  double amp_dist = 0.0;
  for (std::size_t k = 0; k < s.size(); ++k) {
    const bool good = k < 5;
    const double target = good ? 0.2 : 0.0;
    tv += std::abs(std::norm(s.amplitude(k)) - target);
    const Complex ideal = good ? Complex(std::sqrt(0.2), 0.0) : Complex(0.0, 0.0);
    amp_dist += std::norm(s.amplitude(k) / phase - ideal);
  }
  tv /= 2.0;
  amp_dist = std::sqrt(amp_dist);
  return {tv < 1e-6 && amp_dist < 1e-6 && std::abs(theta - std::acos(0.2)) < 1e-15,
          "theta = " + fmt("%.15f", theta) + "; total variation " + fmt("%.2e", tv) + "; amplitude distance " +
              fmt("%.2e", amp_dist)};
}

Outcome commuting_unitaries() {
  const int n = 11;
  const auto spec = sc::spectral(n);
  double worst = 0.0, worst_exp = 0.0;
  for (int s = 0; s <= n / 2; ++s) {
    for (int t = 0; t <= n / 2; ++t) {
      const auto as = sc::adjacency(n, s);
      const auto at = sc::adjacency(n, t);
      const sc::ComplexMatrix us = sc::walk_unitary(as, 1.3, spec);
      const sc::ComplexMatrix ut = sc::walk_unitary(at, 0.7, spec);
      worst = std::max(worst, (us * ut - ut * us).norm());
      // Independent unitaries from the matrix exponential.
      const sc::ComplexMatrix es = (Complex(0.0, -1.3) * as.entries.cast<Complex>()).exp();
      const sc::ComplexMatrix et = (Complex(0.0, -0.7) * at.entries.cast<Complex>()).exp();
      worst_exp = std::max(worst_exp, (es * et - et * es).norm());
    }
  }
  return {worst < 1e-9 && worst_exp < 1e-9, "36 ordered pairs; max ||[U_s(1.3), U_t(0.7)]||_F = " +
                                               fmt("%.2e", worst) + " (matrix exponential: " + fmt("%.2e", worst_exp) +
                                               ")"};
}

Outcome spectral_forms() {
  double eig_err = 0.0, idem_err = 0.0, rebuild_err = 0.0;
  for (int n : {5, 7, 11, 12}) {
    const auto spec = sc::spectral(n);
    const int d = n / 2;
    for (int cls = 0; cls <= d; ++cls) {
      const auto a = sc::adjacency(n, cls);
      Eigen::SelfAdjointEigenSolver<sc::Matrix> solver(a.entries);
      std::vector<double> numeric(solver.eigenvalues().data(), solver.eigenvalues().data() + n);
      // Closed form: A_cls = w (C^cls + C^-cls) has eigenvalue w (omega^{cls k} + omega^{-cls k}) for k in Z/n.
      std::vector<double> closed;
      for (int k = 0; k < n; ++k) closed.push_back(sc::class_weight(n, cls) * sc::cyclic_eigenvalue(n, cls, k));
      std::sort(closed.begin(), closed.end());
      for (int k = 0; k < n; ++k) eig_err = std::max(eig_err, std::abs(closed[k] - numeric[k]));
      sc::ComplexMatrix rebuilt = sc::ComplexMatrix::Zero(n, n);
      for (int s = 0; s <= d; ++s) {
        eig_err = std::max(eig_err, std::abs(spec.eigenvalue(cls, s) -
                                             sc::class_weight(n, cls) * sc::cyclic_eigenvalue(n, cls, s)));
        rebuilt += spec.eigenvalue(cls, s) * spec.idempotents[s];
      }
      rebuild_err = std::max(rebuild_err, (rebuilt - a.entries.cast<Complex>()).norm());
    }
    for (int s = 0; s <= d; ++s) {
      for (int t = 0; t <= d; ++t) {
        const sc::ComplexMatrix want = s == t ? spec.idempotents[s] : sc::ComplexMatrix::Zero(n, n);
        idem_err = std::max(idem_err, (spec.idempotents[s] * spec.idempotents[t] - want).norm());
      }
    }
  }
  return {eig_err < 1e-9 && idem_err < 1e-9 && rebuild_err < 1e-9,
          "n in {5,7,11,12}: eigenvalue error " + fmt("%.2e", eig_err) + ", E_sE_t error " + fmt("%.2e", idem_err) +
              ", reconstruction error " + fmt("%.2e", rebuild_err)};
}

Outcome intersection_numbers() {
  int checked = 0;
  bool ok = true;
  for (int n : {5, 7, 11, 12}) {
    const auto p = sc::intersection_numbers(n);
    const int d = n / 2;
    for (int i = 0; i <= d; ++i) {
      for (int j = 0; j <= d; ++j) {
        const sc::Matrix prod = sc::adjacency(n, i).entries * sc::adjacency(n, j).entries;
        sc::Matrix expansion = sc::Matrix::Zero(n, n);
        for (int k = 0; k <= d; ++k) {
          // Coefficient of A_k read off the entry (k, 0), whose difference lies in class k.
          const double brute = prod(k, 0);
          ok &= std::abs(brute - p(i, j, k)) < 1e-12;
          expansion += brute * sc::adjacency(n, k).entries;
        }
        ok &= (expansion - prod).norm() < 1e-12;
        ++checked;
      }
    }
  }
  return {ok, std::to_string(checked) + " products A_iA_j expanded and matched"};
}

Outcome action_properties() {
  const auto table = sc::load_action_table(kFixture);
  const std::set<sc::Residue> J(table->j_set().begin(), table->j_set().end());
  bool cycles = true, commute = true, inverse = true;
  const auto& names = table->cycles();
  for (const auto& [name, _] : names) {
    const auto x = sc::make_action(table, name);
    for (sc::Residue start : J) {
      std::set<sc::Residue> seen;
      sc::Residue j = start;
      for (int k = 0; k < 11; ++k) {
        seen.insert(j);
        j = sc::act(x, j);
      }
      cycles &= j == start && seen == J;
    }
    for (sc::Residue j = 0; j < table->p(); ++j) {
      inverse &= sc::act(x.inverse(), sc::act(x, j)) == j;
    }
  }
  int pairs = 0;
  for (const auto& [xn, _x] : names) {
    for (const auto& [yn, _y] : names) {
      const auto x = sc::make_action(table, xn);
      const auto y = sc::make_action(table, yn);
      for (sc::Residue j : J) commute &= sc::act(x, sc::act(y, j)) == sc::act(y, sc::act(x, j));
      ++pairs;
    }
  }
  return {names.size() == 5 && pairs == 25 && cycles && commute && inverse,
          std::to_string(names.size()) + " cycles free and transitive: " + (cycles ? "yes" : "no") + "; " +
              std::to_string(pairs) + " ordered pairs commute: " + (commute ? "yes" : "no") +
              "; inverse cancels on 0..310: " + (inverse ? "yes" : "no")};
}

Outcome message_roundtrip() {
  const auto table = sc::load_action_table(kFixture);
  const pr::MessageCircuit circuit(table->p(), 4);
  qs::RegisterLayout l;
  l.add("m", 4);
  qor::Rng rng(20261019);
  double worst = 1.0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Complex> m(16, Complex(0.0, 0.0));
    if (trial % 2 == 0) {
      m[rng.uniform_below(16)] = 1.0;
    } else {
      double norm = 0.0;
      for (auto& a : m) {
        a = Complex(rng.uniform_real() - 0.5, rng.uniform_real() - 0.5);
        norm += std::norm(a);
      }
      for (auto& a : m) a /= std::sqrt(norm);
    }
    const auto j = static_cast<sc::Residue>(rng.uniform_below(table->p()));
    qs::StateVector s(l);
    s.prepare_register("m", m);
    circuit.encrypt(s, "m", j);
    circuit.decrypt(s, "m", j);
    worst = std::min(worst, s.register_fidelity("m", m));
  }
  // Wrong key: each qubit sees RX(theta_k(213) - theta_k(236)).
  const auto a = circuit.angles(213);
  const auto b = circuit.angles(236);
  double oracle = 1.0;
  for (std::size_t k = 0; k < 4; ++k) oracle *= std::pow(std::cos((a[k] - b[k]) / 2.0), 2);
  const auto m = pr::basis_message("0101");
  qs::StateVector w(l);
  w.prepare_register("m", m);
  circuit.encrypt(w, "m", 213);
  circuit.decrypt(w, "m", 236);
  const double wrong = w.register_fidelity("m", m);
  const bool wrong_ok = std::abs(wrong - oracle) < 1e-9 && (oracle >= 1.0 - 1e-3 || wrong < 1.0 - 1e-3);
  return {worst >= 1.0 - 1e-9 && wrong_ok, "min round-trip fidelity " + fmt("%.15f", worst) +
                                               " over 100 messages; wrong key (213 vs 236) fidelity " +
                                               fmt("%.6f", wrong) + " (oracle " + fmt("%.6f", oracle) + ")"};
}

Outcome procedure4() {
  const auto ctx = demo_context();
  qs::StateVector rsq(qs::RegisterLayout{}.add("x", 1));
  qs::StateVector naive = rsq;
  pr::Procedure4Params p;
  p.shots = 1000;
  p.seed = 4;
  p.capture_state = &rsq;
  const auto res = pr::run_procedure4(ctx, p);
  p.mapper = pr::MapperKind::Naive;
  p.capture_state = &naive;
  const auto res_naive = pr::run_procedure4(ctx, p);
  double diff = 0.0;
  if (rsq.size() != naive.size()) return {false, "captured states differ in size"};
  for (std::size_t k = 0; k < rsq.size(); ++k) diff += std::norm(rsq.amplitude(k) - naive.amplitude(k));
  diff = std::sqrt(diff);
  std::uint64_t hits = 0;
  for (const auto& s : res.shots) hits += s.j == 213 ? 1 : 0;
  return {hits == p.shots && res_naive.all_recovered() && diff < 1e-9,
          std::to_string(hits) + "/" + std::to_string(p.shots) + " shots read 213; ||psi_rsq - psi_naive|| = " +
              fmt("%.2e", diff)};
}

Outcome attack_uniformity() {
  pr::RunConfig c;
  c.fixture = kFixture;
  c.chain = kFive;
  c.omega = 2;
  c.Omega = 5;
  c.message = "0101";
  c.seed = 4242;
  c.shots = kShots;
  const auto rep = qor::attacks::intercept_measure(c, {{0}, qor::attacks::Mode::MeasureAndResend, std::nullopt});
  std::set<sc::Residue> observed;
  std::string detail;
  for (const auto& [j, n] : rep.histogram) {
    observed.insert(j);
    detail += std::to_string(j) + ":" + std::to_string(n) + " ";
  }
  const bool support = observed == std::set<sc::Residue>{307, 213, 248, 116, 193};
  const double p = rep.uniformity ? rep.uniformity->p_value : 0.0;
  return {support && p > 0.001 && rep.key_unchanged(),
          detail + "chi-square p = " + fmt("%.4f", p) + "; receiver recovered 213 on " +
              std::to_string(rep.recovered_ok) + "/" + std::to_string(rep.shots) + " shots"};
}

Outcome determinism() {
  const fs::path dir = fs::temp_directory_path() / "qor_acceptance_determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string config = (fs::path(kData).parent_path() / "configs" / "demo5.json").string();
  std::ostringstream o1, e1, o2, e2;
  const int c1 = qor::cli::run_cli({"run", "--config", config, "--out", (dir / "first.json").string(), "--histogram",
                                    (dir / "first.csv").string()},
                                   o1, e1);
  const int c2 = qor::cli::run_cli({"run", "--config", config, "--out", (dir / "second.json").string(), "--histogram",
                                    (dir / "second.csv").string()},
                                   o2, e2);
  const std::string t1 = slurp(dir / "first.json"), t2 = slurp(dir / "second.json");
  const bool same = !t1.empty() && t1 == t2 && slurp(dir / "first.csv") == slurp(dir / "second.csv");
  return {c1 == 0 && c2 == 0 && same, "two runs of configs/demo5.json: " + std::to_string(t1.size()) +
                                          " bytes each, identical: " + (same ? "yes" : "no")};
}

struct Criterion {
  int id;
  const char* title;
  double budget_seconds;  // 0: no time limit
  std::function<Outcome()> check;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {1, "class number of -167 is 11", 1.0, class_number},
      {2, "group axioms on the 11x11 Cayley table", 1.0, group_axioms},
      {3, "five-actor demo recovers 213 on every shot", 120.0, demo_recovery},
      {4, "first-measurement outcomes uniform", 0.0, first_measurement_uniformity},
      {5, "exact Grover filter for Q=3, Omega=5", 0.0, grover_filter},
      {6, "walk unitaries of the n=11 scheme commute", 0.0, commuting_unitaries},
      {7, "spectral closed forms and idempotents", 0.0, spectral_forms},
      {8, "intersection numbers match brute force", 0.0, intersection_numbers},
      {9, "fixture action is free, transitive, abelian, invertible", 0.0, action_properties},
      {10, "message encryption round trip and wrong key", 0.0, message_roundtrip},
      {11, "Procedure 4 is deterministic; mappers agree", 0.0, procedure4},
      {12, "measure-and-resend observes a uniform support", 0.0, attack_uniformity},
      {13, "identical config and seed give identical transcripts", 0.0, determinism},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o{false, ""};
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = c.budget_seconds == 0.0 || secs < c.budget_seconds;
    const bool pass = o.pass && in_time;
    failures += pass ? 0 : 1;
    std::string timing = fmt("%.3f s", secs);
    if (c.budget_seconds > 0.0) timing += fmt(" of %.0f s budget", c.budget_seconds);
    std::cout << (pass ? "PASS" : "FAIL") << "  criterion " << c.id << ": " << c.title << " [" << timing << "] "
              << o.detail << std::endl;
  }
  std::cout << (criteria.size() - failures) << "/" << criteria.size() << " criteria passed" << std::endl;
  return failures == 0 ? 0 : 1;
}
