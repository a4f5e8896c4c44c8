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
 * @file qsim.hpp
 * @brief Small statevector engine.
 *
 * Qubits are grouped into named registers. Registers occupy contiguous bit
 * ranges of the basis index in declaration order, the first declared
 * register holding the least significant bits; inside a register bit 0 is
 * the least significant. A layout (i: 3, anc: 1, j: 9) therefore puts i in
 * bits 0-2, anc in bit 3 and j in bits 4-12.
 *
 * Permutation oracles act as index remaps; no dense matrices are built.
 */

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "qor/errors.hpp"
#include "qor/rng.hpp"
#include "qor/scheme.hpp"

namespace qor::qsim {

using Amplitude = std::complex<double>;
using Qubit = unsigned;

inline constexpr unsigned kDefaultQubitGuard = 26;

/// Named registers with widths.
class RegisterLayout {
 public:
  struct Register {
    std::string name;
    unsigned offset;
    unsigned width;
  };

  RegisterLayout() = default;

  RegisterLayout& add(const std::string& name, unsigned width) {
    if (width == 0) throw InvalidArgument("register '" + name + "' has zero width");
    for (const auto& r : registers_) {
      if (r.name == name) throw InvalidArgument("duplicate register name '" + name + "'");
    }
    registers_.push_back({name, total_, width});
    total_ += width;
    return *this;
  }

  unsigned total_qubits() const noexcept { return total_; }
  bool empty() const noexcept { return registers_.empty(); }
  const std::vector<Register>& registers() const noexcept { return registers_; }

  bool has(const std::string& name) const {
    for (const auto& r : registers_)
      if (r.name == name) return true;
    return false;
  }

  const Register& reg(const std::string& name) const {
    for (const auto& r : registers_)
      if (r.name == name) return r;
    throw InvalidArgument("no register named '" + name + "'");
  }

  /// Global index of bit k of the named register.
  Qubit qubit(const std::string& name, unsigned k) const {
    const auto& r = reg(name);
    if (k >= r.width) throw InvalidArgument("bit " + std::to_string(k) + " outside register '" + name + "'");
    return r.offset + k;
  }

  std::vector<Qubit> qubits(const std::string& name) const {
    const auto& r = reg(name);
    std::vector<Qubit> out(r.width);
    for (unsigned k = 0; k < r.width; ++k) out[k] = r.offset + k;
    return out;
  }

  friend bool operator==(const RegisterLayout& x, const RegisterLayout& y) {
    if (x.registers_.size() != y.registers_.size()) return false;
    for (std::size_t i = 0; i < x.registers_.size(); ++i) {
      if (x.registers_[i].name != y.registers_[i].name || x.registers_[i].width != y.registers_[i].width) return false;
    }
    return true;
  }

 private:
  std::vector<Register> registers_;
  unsigned total_ = 0;
};

/// Bijection of {0 .. 2^width - 1}.
class PermutationGate {
 public:
  PermutationGate(unsigned width, std::vector<std::uint32_t> map) : width_(width), map_(std::move(map)) {
    if (width == 0 || width > 30) throw InvalidArgument("permutation width out of range");
    if (map_.size() != (std::size_t{1} << width)) throw InvalidArgument("permutation size is not 2^width");
    std::vector<char> seen(map_.size(), 0);
    for (auto v : map_) {
      if (v >= map_.size() || seen[v]) throw InvalidArgument("permutation is not bijective");
      seen[v] = 1;
    }
  }

  static PermutationGate identity(unsigned width) {
    std::vector<std::uint32_t> m(std::size_t{1} << width);
    for (std::size_t x = 0; x < m.size(); ++x) m[x] = static_cast<std::uint32_t>(x);
    return PermutationGate(width, std::move(m));
  }

  /// x -> act(action, x, steps) for x < p, identity on the rest of the register.
  static PermutationGate from_action(const scheme::CycleAction& action, unsigned width, long long steps = 1) {
    const std::size_t size = std::size_t{1} << width;
    if (action.table->p() > size) throw InvalidArgument("register too narrow for residues mod p");
    std::vector<std::uint32_t> m(size);
    for (std::size_t x = 0; x < size; ++x) {
      m[x] = x < action.table->p() ? static_cast<std::uint32_t>(scheme::act(action, x, steps))
                                   : static_cast<std::uint32_t>(x);
    }
    return PermutationGate(width, std::move(m));
  }

  unsigned width() const noexcept { return width_; }
  std::uint32_t operator()(std::uint32_t x) const { return map_.at(x); }
  const std::vector<std::uint32_t>& map() const noexcept { return map_; }

  PermutationGate inverse() const {
    std::vector<std::uint32_t> inv(map_.size());
    for (std::size_t x = 0; x < map_.size(); ++x) inv[map_[x]] = static_cast<std::uint32_t>(x);
    return PermutationGate(width_, std::move(inv));
  }

  /// (*this) after `first`: x -> this(first(x)).
  PermutationGate after(const PermutationGate& first) const {
    if (first.width_ != width_) throw InvalidArgument("permutation width mismatch");
    std::vector<std::uint32_t> m(map_.size());
    for (std::size_t x = 0; x < map_.size(); ++x) m[x] = map_[first.map_[x]];
    return PermutationGate(width_, std::move(m));
  }

  PermutationGate power(std::uint64_t k) const {
    PermutationGate result = identity(width_);
    PermutationGate sq = *this;
    while (k > 0) {
      if (k & 1U) result = sq.after(result);
      k >>= 1U;
      if (k > 0) sq = sq.after(sq);
    }
    return result;
  }

  friend bool operator==(const PermutationGate&, const PermutationGate&) = default;

 private:
  unsigned width_;
  std::vector<std::uint32_t> map_;
};

/// One stage of a controlled cascade: apply `gate` where `control` is 1.
struct ControlledStage {
  Qubit control;
  PermutationGate gate;
};

/// Bit k of the controls drives gate^(2^k): |i>|x> -> |i>|gate^i x>.
inline std::vector<ControlledStage> repeated_squaring_schedule(const PermutationGate& gate,
                                                               const std::vector<Qubit>& controls) {
  std::vector<ControlledStage> out;
  PermutationGate g = gate;
  for (std::size_t k = 0; k < controls.size(); ++k) {
    out.push_back({controls[k], g});
    g = g.after(g);
  }
  return out;
}

/// Same map built from 2^Q - 1 single controlled shifts (2^k copies on bit k).
inline std::vector<ControlledStage> naive_shift_schedule(const PermutationGate& gate,
                                                         const std::vector<Qubit>& controls) {
  std::vector<ControlledStage> out;
  for (std::size_t k = 0; k < controls.size(); ++k) {
    for (std::size_t c = 0; c < (std::size_t{1} << k); ++c) out.push_back({controls[k], gate});
  }
  return out;
}

struct MeasurementResult {
  /// One value per measured register, in the order requested.
  std::vector<std::uint64_t> values;
  double probability;
};

class StateVector {
 public:
  explicit StateVector(RegisterLayout layout, unsigned guard = kDefaultQubitGuard) : layout_(std::move(layout)) {
    if (layout_.empty()) throw InvalidArgument("state needs at least one register");
    if (layout_.total_qubits() > guard) {
      throw ResourceError(std::to_string(layout_.total_qubits()) + " qubits exceed the guard of " +
                          std::to_string(guard));
    }
    amp_.assign(std::size_t{1} << layout_.total_qubits(), Amplitude{0.0, 0.0});
    amp_[0] = 1.0;
  }

  const RegisterLayout& layout() const noexcept { return layout_; }
  unsigned num_qubits() const noexcept { return layout_.total_qubits(); }
  std::size_t size() const noexcept { return amp_.size(); }
  std::span<const Amplitude> amplitudes() const noexcept { return amp_; }
  Amplitude amplitude(std::size_t index) const { return amp_.at(index); }

  double norm() const {
    double s = 0.0;
    for (const auto& a : amp_) s += std::norm(a);
    return std::sqrt(s);
  }

  /// Value of register `name` in basis state `index`.
  std::uint64_t register_value(std::size_t index, const std::string& name) const {
    const auto& r = layout_.reg(name);
    return (index >> r.offset) & ((std::uint64_t{1} << r.width) - 1);
  }

  /// Sets the computational basis state whose register values are given (others 0).
  void set_basis(const std::vector<std::pair<std::string, std::uint64_t>>& values) {
    std::size_t index = 0;
    for (const auto& [name, v] : values) {
      const auto& r = layout_.reg(name);
      if (v >> r.width) throw InvalidArgument("value does not fit register '" + name + "'");
      index |= static_cast<std::size_t>(v) << r.offset;
    }
    std::fill(amp_.begin(), amp_.end(), Amplitude{0.0, 0.0});
    amp_[index] = 1.0;
  }

  /// Replaces the amplitudes; `amps` must have the right size and unit norm.
  void set_amplitudes(std::vector<Amplitude> amps) {
    if (amps.size() != amp_.size()) throw InvalidArgument("amplitude vector has the wrong size");
    double s = 0.0;
    for (const auto& a : amps) s += std::norm(a);
    if (std::abs(s - 1.0) > 1e-9) throw InvalidArgument("amplitude vector is not normalised");
    amp_ = std::move(amps);
  }

  // -- single-qubit gates ----------------------------------------------------

  void apply_1q(Qubit q, const Amplitude (&m)[2][2]) {
    check_qubit(q);
    const std::size_t bit = std::size_t{1} << q;
    for (std::size_t i = 0; i < amp_.size(); ++i) {
      if (i & bit) continue;
      const Amplitude a0 = amp_[i], a1 = amp_[i | bit];
      amp_[i] = m[0][0] * a0 + m[0][1] * a1;
      amp_[i | bit] = m[1][0] * a0 + m[1][1] * a1;
    }
  }

  void h(Qubit q) {
    const double s = std::numbers::sqrt2 / 2.0;
    const Amplitude m[2][2] = {{s, s}, {s, -s}};
    apply_1q(q, m);
  }

  void x(Qubit q) {
    check_qubit(q);
    const std::size_t bit = std::size_t{1} << q;
    for (std::size_t i = 0; i < amp_.size(); ++i)
      if (!(i & bit)) std::swap(amp_[i], amp_[i | bit]);
  }

  void rx(Qubit q, double theta) {
    const double c = std::cos(theta / 2), s = std::sin(theta / 2);
    const Amplitude m[2][2] = {{c, Amplitude(0, -s)}, {Amplitude(0, -s), c}};
    apply_1q(q, m);
  }

  /// diag(1, e^{i theta}).
  void phase(Qubit q, double theta) { mcp(theta, {}, q); }

  void cx(Qubit control, Qubit target) {
    check_qubit(control);
    check_qubit(target);
    if (control == target) throw InvalidArgument("cx: control equals target");
    const std::size_t cbit = std::size_t{1} << control, tbit = std::size_t{1} << target;
    for (std::size_t i = 0; i < amp_.size(); ++i)
      if ((i & cbit) && !(i & tbit)) std::swap(amp_[i], amp_[i | tbit]);
  }

  /// Multi-controlled phase: e^{i theta} on basis states with all controls and the target set.
  void mcp(double theta, const std::vector<Qubit>& controls, Qubit target) {
    check_qubit(target);
    std::size_t mask = std::size_t{1} << target;
    for (Qubit c : controls) {
      check_qubit(c);
      if (c == target) throw InvalidArgument("mcp: control equals target");
      mask |= std::size_t{1} << c;
    }
    const Amplitude ph = std::polar(1.0, theta);
    for (std::size_t i = 0; i < amp_.size(); ++i)
      if ((i & mask) == mask) amp_[i] *= ph;
  }

  void h(const std::vector<Qubit>& qs) {
    for (Qubit q : qs) h(q);
  }
  void x(const std::vector<Qubit>& qs) {
    for (Qubit q : qs) x(q);
  }

  // -- permutation oracles ---------------------------------------------------

  /// |x>_reg -> |gate(x)>_reg on every basis state.
  void apply_permutation(const PermutationGate& gate, const std::string& reg_name) {
    apply_permutation_impl(gate, layout_.reg(reg_name), std::nullopt);
  }

  /// Applies each stage in order, each conditioned on its control qubit.
  void apply_controlled_permutation(const std::vector<ControlledStage>& schedule, const std::string& reg_name) {
    const auto& r = layout_.reg(reg_name);
    for (const auto& stage : schedule) {
      check_qubit(stage.control);
      if (stage.control >= r.offset && stage.control < r.offset + r.width) {
        throw InvalidArgument("control qubit lies inside the target register");
      }
      apply_permutation_impl(stage.gate, r, stage.control);
    }
  }

  /// Flips `ancilla` on exactly the basis states whose index register is < omega.
  void comparator_mark(std::uint64_t omega, const std::string& index_reg, Qubit ancilla) {
    const auto& r = layout_.reg(index_reg);
    if (omega == 0 || omega > (std::uint64_t{1} << r.width)) {
      throw InvalidArgument("comparator: Omega must satisfy 0 < Omega <= 2^Q");
    }
    check_qubit(ancilla);
    if (ancilla >= r.offset && ancilla < r.offset + r.width) throw InvalidArgument("ancilla inside index register");
    const std::size_t abit = std::size_t{1} << ancilla;
    for (std::size_t i = 0; i < amp_.size(); ++i) {
      if (i & abit) continue;
      if (register_value(i, index_reg) < omega) std::swap(amp_[i], amp_[i | abit]);
    }
  }

  /**
   * Exact single-iteration amplitude filter onto index values < omega.
   *
   * Requires the index register in uniform superposition (product with the
   * rest) and the ancilla in |0>. Marks good states with a phase theta via
   * the comparator, then applies the diffusion H X mcp(theta) X H with
   * cos(theta) = 1 - 2^Q / (2 omega). No-op when omega = 2^Q.
   */
  void grover_filter(std::uint64_t omega, const std::string& index_reg, Qubit ancilla) {
    const auto& r = layout_.reg(index_reg);
    const std::uint64_t full = std::uint64_t{1} << r.width;
    if (omega == 0 || omega > full) throw InvalidArgument("grover_filter: Omega must satisfy 0 < Omega <= 2^Q");
    if (omega == full) return;
    if (2 * omega <= full) throw InvalidArgument("grover_filter: needs Omega > 2^(Q-1) for an exact rotation");
    check_qubit(ancilla);
    check_uniform_index(r, ancilla);

    const double theta = filter_angle(omega, r.width);
    comparator_mark(omega, index_reg, ancilla);
    phase(ancilla, theta);
    comparator_mark(omega, index_reg, ancilla);

    const auto idx = layout_.qubits(index_reg);
    h(idx);
    x(idx);
    mcp(theta, std::vector<Qubit>(idx.begin(), idx.end() - 1), idx.back());
    x(idx);
    h(idx);
  }

  static double filter_angle(std::uint64_t omega, unsigned q) {
    return std::acos(1.0 - static_cast<double>(std::uint64_t{1} << q) / (2.0 * static_cast<double>(omega)));
  }

  /// Maps |0>_reg to (1/sqrt(omega)) sum_{i<omega} |i>_reg directly; the register must hold |0>.
  void prepare_uniform(const std::string& reg_name, std::uint64_t omega) {
    const auto& r = layout_.reg(reg_name);
    if (omega == 0 || omega > (std::uint64_t{1} << r.width)) throw InvalidArgument("prepare_uniform: bad Omega");
    const std::size_t mask = ((std::size_t{1} << r.width) - 1) << r.offset;
    std::vector<Amplitude> out(amp_.size(), Amplitude{0.0, 0.0});
    const double w = 1.0 / std::sqrt(static_cast<double>(omega));
    for (std::size_t i = 0; i < amp_.size(); ++i) {
      if (amp_[i] == Amplitude{0.0, 0.0}) continue;
      if (i & mask) throw InvalidArgument("prepare_uniform: register is not in |0>");
      for (std::uint64_t v = 0; v < omega; ++v) out[i | (static_cast<std::size_t>(v) << r.offset)] = amp_[i] * w;
    }
    amp_ = std::move(out);
  }

  /// Loads a pure state into a register that currently holds |0>.
  void prepare_register(const std::string& reg_name, std::span<const Amplitude> state) {
    const auto& r = layout_.reg(reg_name);
    const std::size_t dim = std::size_t{1} << r.width;
    if (state.size() != dim) throw InvalidArgument("prepare_register: state has the wrong dimension");
    double n = 0.0;
    for (const auto& a : state) n += std::norm(a);
    if (std::abs(n - 1.0) > 1e-9) throw InvalidArgument("prepare_register: state is not normalised");
    const std::size_t mask = (dim - 1) << r.offset;
    std::vector<Amplitude> out(amp_.size(), Amplitude{0.0, 0.0});
    for (std::size_t i = 0; i < amp_.size(); ++i) {
      if (amp_[i] == Amplitude{0.0, 0.0}) continue;
      if (i & mask) throw InvalidArgument("prepare_register: register '" + reg_name + "' is not in |0>");
      for (std::size_t v = 0; v < dim; ++v) out[i | (v << r.offset)] = amp_[i] * state[v];
    }
    amp_ = std::move(out);
  }

  // -- measurement -----------------------------------------------------------

  /// Joint distribution of the named registers, indexed by the concatenated
  /// value (first register in the least significant bits).
  std::vector<double> marginal(const std::vector<std::string>& regs) const {
    unsigned bits = 0;
    for (const auto& n : regs) bits += layout_.reg(n).width;
    std::vector<double> probs(std::size_t{1} << bits, 0.0);
    for (std::size_t i = 0; i < amp_.size(); ++i) {
      const double p = std::norm(amp_[i]);
      if (p != 0.0) probs[joint_key(i, regs)] += p;
    }
    return probs;
  }

  /// Born-rule sample of the named registers; collapses and renormalises.
  MeasurementResult measure(const std::vector<std::string>& regs, Rng& rng) {
    const auto probs = marginal(regs);
    const std::size_t chosen = sample_outcome(probs, rng.uniform_real());
    const double p = collapse(regs, chosen);
    return {split_key(regs, chosen), p};
  }

  /// Index k of the first outcome whose cumulative probability exceeds u
  /// (zero-probability outcomes are never chosen).
  static std::size_t sample_outcome(const std::vector<double>& probs, double u) {
    double acc = 0.0;
    std::size_t last_nonzero = probs.size();
    for (std::size_t k = 0; k < probs.size(); ++k) {
      if (probs[k] <= 0.0) continue;
      last_nonzero = k;
      acc += probs[k];
      if (u < acc) return k;
    }
    if (last_nonzero == probs.size()) throw InternalError("measurement on a zero state");
    return last_nonzero;
  }

  /// Projects onto the joint outcome `key` of the named registers and
  /// renormalises; returns the probability of that outcome.
  double collapse(const std::vector<std::string>& regs, std::size_t key) {
    double p = 0.0;
    for (std::size_t i = 0; i < amp_.size(); ++i)
      if (joint_key(i, regs) == key) p += std::norm(amp_[i]);
    if (p <= 0.0) throw InvalidArgument("collapse onto an outcome of probability zero");
    const double scale = 1.0 / std::sqrt(p);
    for (std::size_t i = 0; i < amp_.size(); ++i) {
      if (joint_key(i, regs) == key) {
        amp_[i] *= scale;
      } else {
        amp_[i] = 0.0;
      }
    }
    return p;
  }

  /// Per-register values of a joint key produced by marginal().
  std::vector<std::uint64_t> split_key(const std::vector<std::string>& regs, std::size_t key) const {
    std::vector<std::uint64_t> values;
    std::size_t shift = 0;
    for (const auto& n : regs) {
      const unsigned w = layout_.reg(n).width;
      values.push_back((key >> shift) & ((std::uint64_t{1} << w) - 1));
      shift += w;
    }
    return values;
  }

  /// <t| rho_reg |t> for a pure target state on one register.
  double register_fidelity(const std::string& reg_name, std::span<const Amplitude> target) const {
    const auto& r = layout_.reg(reg_name);
    const std::size_t dim = std::size_t{1} << r.width;
    if (target.size() != dim) throw InvalidArgument("target state has the wrong dimension");
    const std::size_t mask = (dim - 1) << r.offset;
    double f = 0.0;
    for (std::size_t rest = 0; rest < amp_.size(); ++rest) {
      if (rest & mask) continue;
      Amplitude overlap{0.0, 0.0};
      for (std::size_t v = 0; v < dim; ++v) overlap += std::conj(target[v]) * amp_[rest | (v << r.offset)];
      f += std::norm(overlap);
    }
    return f;
  }

 private:
  void check_qubit(Qubit q) const {
    if (q >= layout_.total_qubits()) throw InvalidArgument("qubit " + std::to_string(q) + " out of range");
  }

  std::size_t joint_key(std::size_t index, const std::vector<std::string>& regs) const {
    std::size_t key = 0, shift = 0;
    for (const auto& n : regs) {
      const auto& r = layout_.reg(n);
      key |= ((index >> r.offset) & ((std::size_t{1} << r.width) - 1)) << shift;
      shift += r.width;
    }
    return key;
  }

  void apply_permutation_impl(const PermutationGate& gate, const RegisterLayout::Register& r,
                              std::optional<Qubit> control) {
    if (gate.width() != r.width) {
      throw InvalidArgument("permutation width " + std::to_string(gate.width()) + " differs from register '" + r.name +
                            "' width " + std::to_string(r.width));
    }
    const std::size_t mask = (std::size_t{1} << r.width) - 1;
    const std::size_t cbit = control ? (std::size_t{1} << *control) : 0;
    const auto& map = gate.map();
    scratch_.resize(amp_.size());
    for (std::size_t i = 0; i < amp_.size(); ++i) {
      if (control && !(i & cbit)) {
        scratch_[i] = amp_[i];
        continue;
      }
      const std::size_t v = (i >> r.offset) & mask;
      scratch_[(i & ~(mask << r.offset)) | (static_cast<std::size_t>(map[v]) << r.offset)] = amp_[i];
    }
    amp_.swap(scratch_);
  }

  void check_uniform_index(const RegisterLayout::Register& r, Qubit ancilla) const {
    const std::size_t mask = ((std::size_t{1} << r.width) - 1) << r.offset;
    const std::size_t abit = std::size_t{1} << ancilla;
    for (std::size_t i = 0; i < amp_.size(); ++i) {
      if ((i & abit) && std::abs(amp_[i]) > 1e-9) throw InvalidArgument("grover_filter: ancilla is not |0>");
      if (std::abs(amp_[i] - amp_[i & ~mask]) > 1e-9) {
        throw InvalidArgument("grover_filter: index register is not in uniform superposition");
      }
    }
  }

  RegisterLayout layout_;
  std::vector<Amplitude> amp_;
  std::vector<Amplitude> scratch_;
};

/// |<s1|s2>|^2.
inline double fidelity(const StateVector& s1, const StateVector& s2) {
  if (!(s1.layout() == s2.layout())) throw InvalidArgument("fidelity: layouts differ");
  Amplitude ip{0.0, 0.0};
  const auto a = s1.amplitudes();
  const auto b = s2.amplitudes();
  for (std::size_t i = 0; i < a.size(); ++i) ip += std::conj(a[i]) * b[i];
  return std::norm(ip);
}

/// `width` binary digits of v, most significant first.
inline std::string bits_msb_first(std::uint64_t v, unsigned width) {
  std::string s(width, '0');
  for (unsigned k = 0; k < width; ++k)
    if ((v >> k) & 1U) s[width - 1 - k] = '1';
  return s;
}

}  // namespace qor::qsim
