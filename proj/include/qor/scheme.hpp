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
 * @file scheme.hpp
 * @brief Isogeny-graph model.
 *
 * Two views of the same cyclic structure:
 *
 *  - ActionTable / CycleAction: the class group acting on a set J of
 *    j-invariants, given as precomputed cycles (one per actor generator).
 *    Residues outside J are fixed points of every action.
 *  - The cyclic association scheme of order n: adjacency classes A_s,
 *    intersection numbers, spectral idempotents and walk unitaries.
 */

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <fstream>
#include <map>
#include <memory>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "qor/classgroup.hpp"
#include "qor/errors.hpp"

namespace qor::scheme {

using Residue = std::uint64_t;

// ---------------------------------------------------------------------------
// Action tables

/// Fixture data: the set J and one cycle per named generator.
class ActionTable {
 public:
  /// Validates every invariant; throws LoadError with a descriptive message.
  static std::shared_ptr<const ActionTable> create(std::int64_t discriminant, Residue p, Residue j0,
                                                   std::map<std::string, std::vector<Residue>> cycles,
                                                   std::vector<Residue> j_set = {}) {
    auto t = std::shared_ptr<ActionTable>(new ActionTable());
    t->discriminant_ = discriminant;
    t->p_ = p;
    t->j0_ = j0;
    t->cycles_ = std::move(cycles);
    t->validate(std::move(j_set));
    return t;
  }

  std::int64_t discriminant() const noexcept { return discriminant_; }
  Residue p() const noexcept { return p_; }
  /// Class order r = |J|.
  std::size_t order() const noexcept { return j_set_.size(); }
  Residue j0() const noexcept { return j0_; }
  /// J in the order the fixture lists it (or ascending when not listed).
  const std::vector<Residue>& j_set() const noexcept { return j_set_; }
  const std::map<std::string, std::vector<Residue>>& cycles() const noexcept { return cycles_; }

  bool contains(Residue j) const { return j < p_ && position_of_j_[j] >= 0; }
  bool has_cycle(const std::string& name) const { return cycles_.count(name) != 0; }

  const std::vector<Residue>& cycle(const std::string& name) const {
    auto it = cycles_.find(name);
    if (it == cycles_.end()) throw InvalidArgument("unknown cycle '" + name + "'");
    return it->second;
  }

  /// Position of j along the named cycle (j must be in J).
  std::size_t position(const std::string& name, Residue j) const {
    return positions_.at(name)[static_cast<std::size_t>(position_of_j_.at(j))];
  }

 private:
  ActionTable() = default;

  void validate(std::vector<Residue> listed) {
    if (p_ < 2) throw LoadError("prime p must be >= 2");
    if (p_ > (Residue{1} << 26)) throw LoadError("p exceeds the desk-scale limit 2^26");
    if (cycles_.empty()) throw LoadError("fixture has no cycles");
    const auto& first = cycles_.begin()->second;
    if (first.empty()) throw LoadError("cycle '" + cycles_.begin()->first + "' is empty");

    std::set<Residue> reference(first.begin(), first.end());
    if (!listed.empty()) {
      std::set<Residue> ls(listed.begin(), listed.end());
      if (ls.size() != listed.size()) throw LoadError("j_set contains a repeated residue");
      reference = ls;
      j_set_ = std::move(listed);
    } else {
      j_set_.assign(reference.begin(), reference.end());
    }
    for (Residue j : j_set_) {
      if (j >= p_) throw LoadError("residue " + std::to_string(j) + " is not < p = " + std::to_string(p_));
    }
    if (reference.count(j0_) == 0) throw LoadError("j0 = " + std::to_string(j0_) + " is not in J");

    position_of_j_.assign(p_, -1);
    for (std::size_t i = 0; i < j_set_.size(); ++i) position_of_j_[j_set_[i]] = static_cast<long>(i);

    const std::size_t r = j_set_.size();
    for (const auto& [name, cyc] : cycles_) {
      if (cyc.size() != r) {
        throw LoadError("cycle '" + name + "' has length " + std::to_string(cyc.size()) + ", expected r = " +
                        std::to_string(r));
      }
      if (cyc.front() != j0_) {
        throw LoadError("cycle '" + name + "' starts at " + std::to_string(cyc.front()) + ", expected j0 = " +
                        std::to_string(j0_));
      }
      std::vector<std::size_t> pos(r, r);
      for (std::size_t k = 0; k < r; ++k) {
        const Residue j = cyc[k];
        if (j >= p_ || position_of_j_[j] < 0) {
          throw LoadError("cycle '" + name + "' visits " + std::to_string(j) + ", which is not in J");
        }
        auto& slot = pos[static_cast<std::size_t>(position_of_j_[j])];
        if (slot != r) {
          throw LoadError("cycle '" + name + "' is not a permutation of J: " + std::to_string(j) + " repeats");
        }
        slot = k;
      }
      positions_[name] = std::move(pos);
    }

    if (discriminant_ != 0) {
      try {
        const classgroup::Discriminant d{classgroup::Integer(discriminant_)};
        const auto h = classgroup::class_number(d);
        if (h != r) {
          throw LoadError("class number h(" + std::to_string(discriminant_) + ") = " + std::to_string(h) +
                          " differs from |J| = " + std::to_string(r));
        }
      } catch (const InvalidArgument& e) {
        throw LoadError(std::string("invalid discriminant: ") + e.what());
      } catch (const ResourceError&) {
        // too large to enumerate; trust the fixture
      }
    }
  }

  std::int64_t discriminant_ = 0;
  Residue p_ = 0;
  Residue j0_ = 0;
  std::vector<Residue> j_set_;
  std::map<std::string, std::vector<Residue>> cycles_;
  std::vector<long> position_of_j_;                             // residue -> index in j_set_, or -1
  std::map<std::string, std::vector<std::size_t>> positions_;  // j_set_ index -> cycle position
};

using TablePtr = std::shared_ptr<const ActionTable>;

/// Parses the fixture JSON document.
inline TablePtr parse_action_table(const nlohmann::json& doc) {
  auto require = [&](const char* key) -> const nlohmann::json& {
    if (!doc.is_object() || !doc.contains(key)) throw LoadError(std::string("fixture: missing field '") + key + "'");
    return doc.at(key);
  };
  auto as_residue = [](const nlohmann::json& v, const std::string& where) -> Residue {
    if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
      throw LoadError("fixture: " + where + " must be a non-negative integer");
    }
    return v.get<Residue>();
  };
  try {
    const auto& disc = require("discriminant");
    if (!disc.is_number_integer()) throw LoadError("fixture: discriminant must be an integer");
    const Residue p = as_residue(require("p"), "p");
    const Residue j0 = as_residue(require("j0"), "j0");
    const auto& cyc = require("cycles");
    if (!cyc.is_object()) throw LoadError("fixture: cycles must be an object of name -> list");
    std::map<std::string, std::vector<Residue>> cycles;
    for (const auto& [name, list] : cyc.items()) {
      if (!list.is_array()) throw LoadError("fixture: cycles." + name + " must be a list");
      std::vector<Residue> v;
      for (std::size_t i = 0; i < list.size(); ++i) {
        v.push_back(as_residue(list[i], "cycles." + name + "[" + std::to_string(i) + "]"));
      }
      cycles.emplace(name, std::move(v));
    }
    std::vector<Residue> j_set;
    if (doc.contains("j_set")) {
      const auto& js = doc.at("j_set");
      if (!js.is_array()) throw LoadError("fixture: j_set must be a list");
      for (std::size_t i = 0; i < js.size(); ++i) j_set.push_back(as_residue(js[i], "j_set[" + std::to_string(i) + "]"));
    }
    return ActionTable::create(disc.get<std::int64_t>(), p, j0, std::move(cycles), std::move(j_set));
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(std::string("fixture: ") + e.what());
  }
}

inline TablePtr load_action_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open fixture '" + path + "'");
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::parse_error& e) {
    throw LoadError("fixture '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_action_table(doc);
}

enum class Direction { Forward = 1, Inverse = -1 };

/// One actor's generator acting on J, optionally inverted.
struct CycleAction {
  TablePtr table;
  std::string actor;
  Direction direction = Direction::Forward;

  CycleAction inverse() const {
    return {table, actor, direction == Direction::Forward ? Direction::Inverse : Direction::Forward};
  }
};

inline CycleAction make_action(TablePtr table, const std::string& actor, Direction dir = Direction::Forward) {
  if (!table) throw InvalidArgument("make_action: null table");
  if (!table->has_cycle(actor)) throw InvalidArgument("unknown cycle '" + actor + "'");
  return {std::move(table), actor, dir};
}

/// j moved `steps` positions along the actor's cycle; fixed if j is not in J.
inline Residue act(const CycleAction& action, Residue j, long long steps = 1) {
  const ActionTable& t = *action.table;
  if (j >= t.p()) throw InvalidArgument("residue " + std::to_string(j) + " is not < p");
  if (!t.contains(j)) return j;
  const auto r = static_cast<long long>(t.order());
  const auto signed_steps = steps * static_cast<long long>(action.direction);
  const auto pos = static_cast<long long>(t.position(action.actor, j));
  const long long next = ((pos + signed_steps) % r + r) % r;
  return t.cycle(action.actor)[static_cast<std::size_t>(next)];
}

/// x(y(j)), one step each.
inline Residue compose_actions(const CycleAction& x, const CycleAction& y, Residue j) {
  if (x.table != y.table) throw InvalidArgument("compose_actions: actions belong to different tables");
  return act(x, act(y, j, 1), 1);
}

// ---------------------------------------------------------------------------
// Cyclic association scheme

using Matrix = Eigen::MatrixXd;
using ComplexMatrix = Eigen::MatrixXcd;

/// Adjacency class A_s of the cyclic scheme of order n.
struct SchemeMatrix {
  int order;
  int index;
  Matrix entries;
};

/// Directed cycle C with C(j, k) = 1 iff j - k = 1 (mod n).
inline Matrix directed_cycle(int n) {
  Matrix c = Matrix::Zero(n, n);
  for (int k = 0; k < n; ++k) c((k + 1) % n, k) = 1.0;
  return c;
}

inline SchemeMatrix adjacency(int n, int s) {
  if (n < 3) throw InvalidArgument("adjacency: order must be >= 3");
  if (s < 0 || s > n / 2) {
    throw InvalidArgument("adjacency: class index " + std::to_string(s) + " outside 0.." + std::to_string(n / 2));
  }
  Matrix a = Matrix::Zero(n, n);
  for (int j = 0; j < n; ++j) {
    for (int k = 0; k < n; ++k) {
      const int diff = ((j - k) % n + n) % n;
      if (diff == s || diff == (n - s) % n) a(j, k) = 1.0;
    }
  }
  return {n, s, std::move(a)};
}

/// 1/2 on the classes written as (C^s + C^-s)/2, i.e. s = 0 and s = n/2.
inline double class_weight(int n, int s) { return (s == 0 || 2 * s == n) ? 0.5 : 1.0; }

/// Class index of the residue m folded into 0..floor(n/2).
inline int fold_class(int n, int m) {
  const int r = ((m % n) + n) % n;
  return std::min(r, n - r);
}

/// p_{ij}(k) such that A_i A_j = sum_k p_{ij}(k) A_k.
class IntersectionNumbers {
 public:
  explicit IntersectionNumbers(int n) : n_(n), d_(n / 2) {
    if (n < 3) throw InvalidArgument("intersection_numbers: order must be >= 3");
    table_.assign(static_cast<std::size_t>((d_ + 1) * (d_ + 1) * (d_ + 1)), 0);
    // A_i = w_i (C^i + C^-i), so A_i A_j = w_i w_j (C^{i+j} + C^{-(i+j)} + C^{i-j} + C^{-(i-j)})
    // and C^m + C^-m = A_fold(m) / w_fold(m).
    for (int i = 0; i <= d_; ++i) {
      for (int j = 0; j <= d_; ++j) {
        const double wij = class_weight(n, i) * class_weight(n, j);
        std::vector<double> coeff(static_cast<std::size_t>(d_ + 1), 0.0);
        for (int m : {i + j, i - j}) {
          const int k = fold_class(n, m);
          coeff[static_cast<std::size_t>(k)] += wij / class_weight(n, k);
        }
        for (int k = 0; k <= d_; ++k) at(i, j, k) = static_cast<int>(std::lround(coeff[static_cast<std::size_t>(k)]));
      }
    }
  }

  int order() const noexcept { return n_; }
  int classes() const noexcept { return d_ + 1; }
  int operator()(int i, int j, int k) const { return table_[index(i, j, k)]; }

  /// The unweighted indicator "i-j = +-k or i+j = +-k (mod n)"; differs from
  /// the exact coefficients on the boundary classes 0 and n/2 and when i = j.
  int indicator(int i, int j, int k) const {
    auto eq = [&](int x) { return fold_class(n_, x) == k; };
    return (eq(i - j) || eq(i + j)) ? 1 : 0;
  }

 private:
  std::size_t index(int i, int j, int k) const {
    if (i < 0 || j < 0 || k < 0 || i > d_ || j > d_ || k > d_) throw InvalidArgument("intersection index out of range");
    return static_cast<std::size_t>((i * (d_ + 1) + j) * (d_ + 1) + k);
  }
  int& at(int i, int j, int k) { return table_[index(i, j, k)]; }

  int n_;
  int d_;
  std::vector<int> table_;
};

inline IntersectionNumbers intersection_numbers(int n) { return IntersectionNumbers(n); }

/// omega^{js} + omega^{-js} with omega = exp(2 pi i / n).
inline double cyclic_eigenvalue(int n, int j, int s) {
  return 2.0 * std::cos(2.0 * std::numbers::pi * static_cast<double>(j) * s / n);
}

/// Common eigenstructure of the cyclic scheme of order n.
struct SpectralData {
  int order;
  std::complex<double> omega;
  /// eigenvalue(cls, s): eigenvalue of A_cls on the range of E_s.
  Matrix eigenvalue;
  /// E_0 .. E_d
  std::vector<ComplexMatrix> idempotents;
};

inline SpectralData spectral(int n) {
  if (n < 3) throw InvalidArgument("spectral: order must be >= 3");
  const int d = n / 2;
  const std::complex<double> omega = std::polar(1.0, 2.0 * std::numbers::pi / n);
  SpectralData out{n, omega, Matrix(d + 1, d + 1), {}};

  for (int cls = 0; cls <= d; ++cls) {
    for (int s = 0; s <= d; ++s) out.eigenvalue(cls, s) = class_weight(n, cls) * cyclic_eigenvalue(n, s, cls);
  }

  // E_s = (1/n) sum_k (w^{ks} + w^{-ks}) C^k, halved on s in {0, n/2}.
  std::vector<Matrix> powers(static_cast<std::size_t>(n));
  const Matrix c = directed_cycle(n);
  powers[0] = Matrix::Identity(n, n);
  for (int k = 1; k < n; ++k) powers[static_cast<std::size_t>(k)] = c * powers[static_cast<std::size_t>(k - 1)];
  for (int s = 0; s <= d; ++s) {
    ComplexMatrix e = ComplexMatrix::Zero(n, n);
    for (int k = 0; k < n; ++k) {
      const std::complex<double> coeff =
          class_weight(n, s) * (std::pow(omega, k * s) + std::pow(omega, -k * s)) / static_cast<double>(n);
      e += coeff * powers[static_cast<std::size_t>(k)].cast<std::complex<double>>();
    }
    out.idempotents.push_back(std::move(e));
  }
  return out;
}

/// e^{-itA} for a scheme class, summed over the spectral idempotents.
inline ComplexMatrix walk_unitary(const SchemeMatrix& a, double t, const SpectralData& spec) {
  if (spec.order != a.order) throw InvalidArgument("walk_unitary: spectral data of another order");
  if (!std::isfinite(t)) throw InvalidArgument("walk_unitary: non-finite time");
  ComplexMatrix u = ComplexMatrix::Zero(a.order, a.order);
  for (int s = 0; s <= a.order / 2; ++s) {
    const double theta = spec.eigenvalue(a.index, s);
    u += std::polar(1.0, -t * theta) * spec.idempotents[static_cast<std::size_t>(s)];
  }
  return u;
}

inline ComplexMatrix walk_unitary(const SchemeMatrix& a, double t) { return walk_unitary(a, t, spectral(a.order)); }

struct WalkStep {
  int class_index;
  double time;
};

/// U_{s_1}(t_1) U_{s_2}(t_2) ... over the scheme of order n.
inline ComplexMatrix product_walk(int n, const std::vector<WalkStep>& word) {
  const auto spec = spectral(n);
  ComplexMatrix u = ComplexMatrix::Identity(n, n);
  for (const auto& step : word) u = u * walk_unitary(adjacency(n, step.class_index), step.time, spec);
  return u;
}

// ---------------------------------------------------------------------------
// Export

enum class GraphFormat { Dot, Csv };

inline GraphFormat parse_graph_format(const std::string& s) {
  if (s == "dot") return GraphFormat::Dot;
  if (s == "csv") return GraphFormat::Csv;
  throw InvalidArgument("unknown graph format '" + s + "' (expected dot or csv)");
}

/**
 * Renders one fixture cycle, or with cycle == "all" the union of all cycles.
 *
 * DOT: a single cycle is a digraph whose edges follow the cycle order; the
 * union is an undirected multigraph with edges labelled by cycle name.
 * CSV: adjacency matrix over J sorted ascending, with a header row.
 */
inline std::string export_graph(const ActionTable& table, const std::string& cycle, GraphFormat fmt) {
  const bool all = cycle == "all";
  std::vector<std::string> names;
  if (all) {
    for (const auto& kv : table.cycles()) names.push_back(kv.first);
  } else {
    table.cycle(cycle);
    names.push_back(cycle);
  }
  std::ostringstream os;
  if (fmt == GraphFormat::Dot) {
    os << (all ? "graph" : "digraph") << " \"" << (all ? std::string("isogeny") : "cycle_" + cycle) << "\" {\n";
    for (Residue j : table.cycle(names.front())) os << "  \"" << j << "\";\n";
    for (const auto& name : names) {
      const auto& cyc = table.cycle(name);
      for (std::size_t k = 0; k < cyc.size(); ++k) {
        os << "  \"" << cyc[k] << "\" " << (all ? "--" : "->") << " \"" << cyc[(k + 1) % cyc.size()] << '"';
        if (all) os << " [label=\"" << name << "\"]";
        os << ";\n";
      }
    }
    os << "}\n";
    return os.str();
  }
  std::vector<Residue> sorted = table.j_set();
  std::sort(sorted.begin(), sorted.end());
  std::map<Residue, std::size_t> idx;
  for (std::size_t i = 0; i < sorted.size(); ++i) idx[sorted[i]] = i;
  std::vector<std::vector<int>> m(sorted.size(), std::vector<int>(sorted.size(), 0));
  for (const auto& name : names) {
    const auto& cyc = table.cycle(name);
    for (std::size_t k = 0; k < cyc.size(); ++k) {
      const auto from = idx[cyc[k]], to = idx[cyc[(k + 1) % cyc.size()]];
      m[from][to] += 1;
      if (all) m[to][from] += 1;
    }
  }
  os << "j";
  for (Residue j : sorted) os << ',' << j;
  os << '\n';
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    os << sorted[i];
    for (int v : m[i]) os << ',' << v;
    os << '\n';
  }
  return os.str();
}

/// DOT (undirected, vertices 0..n-1) or CSV (bare 0/1 rows) of a scheme class.
inline std::string export_graph(const SchemeMatrix& a, GraphFormat fmt) {
  std::ostringstream os;
  const int n = a.order;
  if (fmt == GraphFormat::Dot) {
    os << "graph \"A_" << a.index << "_n" << n << "\" {\n";
    for (int j = 0; j < n; ++j) os << "  " << j << ";\n";
    for (int j = 0; j < n; ++j)
      for (int k = j; k < n; ++k)
        if (a.entries(j, k) != 0.0) os << "  " << j << " -- " << k << ";\n";
    os << "}\n";
    return os.str();
  }
  for (int j = 0; j < n; ++j) {
    for (int k = 0; k < n; ++k) os << (k ? "," : "") << static_cast<int>(a.entries(j, k));
    os << '\n';
  }
  return os.str();
}

}  // namespace qor::scheme
