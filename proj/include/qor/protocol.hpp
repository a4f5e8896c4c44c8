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
 * @file protocol.hpp
 * @brief Multi-actor quantum onion routing runs.
 *
 * A chain lists actors from sender to receiver: chain[0] sends the message,
 * chain[L-1] receives it, everyone in between relays. The j-register makes
 * 2(L-1) hops. Hop 0 leaves the receiver for chain[L-2]; hops 0 .. L-2 walk
 * outwards to the sender, hops L-1 .. 2L-3 walk back to the receiver.
 *
 * Register layout of Procedure 3 (low bits first): index i (Q qubits),
 * ancilla anc (1), j (N = ceil(log2 p)), message m (M). Raw measurement
 * strings list the registers the other way round, most significant bit
 * first: "jjjjjjjjj a iii".
 *
 * Shots are independent runs of one program with per-shot seeds. Between
 * two measurements a program is deterministic, so the state reached after a
 * given sequence of outcomes is cached and reused across shots; a shot only
 * draws its outcomes. Switching the cache off gives bit-identical results.
 */

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "json.hpp"
#include "qor/errors.hpp"
#include "qor/qsim.hpp"
#include "qor/rng.hpp"
#include "qor/scheme.hpp"
#include "qor/sobol.hpp"
#include "qor/stats.hpp"

namespace qor::protocol {

using scheme::Residue;
using qsim::Amplitude;
using Json = nlohmann::ordered_json;

/// Smallest K with 2^K >= x (0 for x <= 1).
inline unsigned ceil_log2(std::uint64_t x) {
  return x <= 1 ? 0U : static_cast<unsigned>(std::bit_width(x - 1));
}

// ---------------------------------------------------------------------------
// Actors and keys

enum class Role { Sender, Intermediary, Receiver };

inline const char* to_string(Role r) {
  switch (r) {
    case Role::Sender:
      return "sender";
    case Role::Intermediary:
      return "intermediary";
    case Role::Receiver:
      return "receiver";
  }
  return "?";
}

/// Secret class-group element: `steps` moves along a fixture cycle.
struct Secret {
  std::string cycle;
  long long steps = 1;
};

struct Actor {
  std::string name;
  Role role = Role::Intermediary;
  scheme::CycleAction action;
  long long steps = 1;

  /// The secret applied `times` times (negative: inverse).
  Residue apply(Residue j, long long times = 1) const { return scheme::act(action, j, steps * times); }

  qsim::PermutationGate shift_gate(unsigned width, long long times = 1) const {
    return qsim::PermutationGate::from_action(action, width, steps * times);
  }
};

/// Actors for an ordered chain (sender first). Each actor defaults to the
/// fixture cycle carrying its own name, one step.
inline std::vector<Actor> build_chain(const scheme::TablePtr& table, const std::vector<std::string>& names,
                                      const std::map<std::string, Secret>& secrets = {}) {
  if (names.size() < 2) throw InvalidArgument("chain needs at least two actors");
  std::set<std::string> seen;
  std::vector<Actor> out;
  for (std::size_t k = 0; k < names.size(); ++k) {
    const auto& name = names[k];
    if (!seen.insert(name).second) throw InvalidArgument("actor '" + name + "' appears twice in the chain");
    Secret secret{name, 1};
    if (auto it = secrets.find(name); it != secrets.end()) secret = it->second;
    if (!table->has_cycle(secret.cycle)) {
      throw InvalidArgument("actor '" + name + "' uses unknown cycle '" + secret.cycle + "'");
    }
    Actor a;
    a.name = name;
    a.role = k == 0 ? Role::Sender : (k + 1 == names.size() ? Role::Receiver : Role::Intermediary);
    a.action = scheme::make_action(table, secret.cycle);
    a.steps = secret.steps;
    out.push_back(std::move(a));
  }
  for (const auto& [name, _] : secrets) {
    if (!seen.count(name)) throw InvalidArgument("secret given for actor '" + name + "' outside the chain");
  }
  return out;
}

struct SessionKey {
  std::string x;
  std::string y;
  Residue j;
};

/// j_xy = x(y(j0)); both orders are evaluated and must agree.
inline SessionKey dh_session_key(const Actor& x, const Actor& y) {
  if (x.action.table != y.action.table) throw InvalidArgument("dh_session_key: actors use different tables");
  const Residue j0 = x.action.table->j0();
  const Residue xy = x.apply(y.apply(j0));
  const Residue yx = y.apply(x.apply(j0));
  if (xy != yx) {
    throw InternalError("Diffie-Hellman asymmetry between '" + x.name + "' and '" + y.name + "': " +
                        std::to_string(xy) + " vs " + std::to_string(yx));
  }
  return {x.name, y.name, xy};
}

/// Final classical step of the receiver: c^{-(i+omega)} applied to the measured j.
inline Residue uncompute_key(std::uint64_t i, std::uint64_t omega, Residue measured_j, const Actor& receiver) {
  return receiver.apply(measured_j, -static_cast<long long>(i + omega));
}

// ---------------------------------------------------------------------------
// Message encryption

/// Point `index` of the fixed Sobol' sequence (optionally digitally shifted).
inline std::vector<double> sobol_point(std::uint64_t index, unsigned dim,
                                       std::optional<std::uint64_t> scramble_seed = std::nullopt) {
  return SobolSequence(dim, scramble_seed).point(index);
}

/// C(j) = RX(theta_0(j)) x ... x RX(theta_{M-1}(j)), theta_k(j) = 2 pi S_{2^K + j}[k].
class MessageCircuit {
 public:
  MessageCircuit(Residue p, unsigned width, std::optional<std::uint64_t> scramble_seed = std::nullopt)
      : p_(p), width_(width), k_(ceil_log2(p)), sobol_(width == 0 ? 1 : width, scramble_seed) {
    if (width == 0 || width > SobolSequence::kMaxDimension) {
      throw InvalidArgument("message width must be in 1.." + std::to_string(SobolSequence::kMaxDimension));
    }
  }

  unsigned width() const noexcept { return width_; }
  unsigned band_exponent() const noexcept { return k_; }

  std::vector<double> angles(Residue j) const {
    if (j >= p_) throw InvalidArgument("message key " + std::to_string(j) + " is not < p");
    auto pt = sobol_.point((std::uint64_t{1} << k_) + j);
    for (auto& x : pt) x *= 2.0 * std::numbers::pi;
    return pt;
  }

  void encrypt(qsim::StateVector& s, const std::string& reg, Residue j) const { apply(s, reg, j, 1.0); }
  void decrypt(qsim::StateVector& s, const std::string& reg, Residue j) const { apply(s, reg, j, -1.0); }

 private:
  void apply(qsim::StateVector& s, const std::string& reg, Residue j, double sign) const {
    const auto qubits = s.layout().qubits(reg);
    if (qubits.size() != width_) throw InvalidArgument("message register width differs from the circuit width");
    const auto th = angles(j);
    for (unsigned k = 0; k < width_; ++k) s.rx(qubits[k], sign * th[k]);
  }

  Residue p_;
  unsigned width_;
  unsigned k_;
  SobolSequence sobol_;
};

inline void message_encrypt(const MessageCircuit& c, qsim::StateVector& s, const std::string& reg, Residue j) {
  c.encrypt(s, reg, j);
}
inline void message_decrypt(const MessageCircuit& c, qsim::StateVector& s, const std::string& reg, Residue j) {
  c.decrypt(s, reg, j);
}

/// Basis state |m> from a bit string written most significant bit first.
inline std::vector<Amplitude> basis_message(const std::string& bits) {
  if (bits.empty() || bits.size() > SobolSequence::kMaxDimension) throw InvalidArgument("message bit string length");
  std::size_t v = 0;
  for (char c : bits) {
    if (c != '0' && c != '1') throw InvalidArgument("message must be a string of 0 and 1");
    v = (v << 1) | static_cast<std::size_t>(c - '0');
  }
  std::vector<Amplitude> out(std::size_t{1} << bits.size(), Amplitude{0.0, 0.0});
  out[v] = 1.0;
  return out;
}

// ---------------------------------------------------------------------------
// Transcript

class Transcript {
 public:
  void record(const std::string& type, const Json& fields = Json::object()) {
    Json e;
    e["seq"] = events_.size();
    e["type"] = type;
    for (const auto& [k, v] : fields.items()) e[k] = v;
    events_.push_back(std::move(e));
  }
  const std::vector<Json>& events() const noexcept { return events_; }
  Json to_json() const { return Json(events_); }

  /// Every "send" is directly followed by the matching "receive" (interceptions may sit in between).
  bool handoffs_matched() const {
    for (std::size_t k = 0; k < events_.size(); ++k) {
      if (events_[k]["type"] != "send") continue;
      std::size_t n = k + 1;
      while (n < events_.size() && events_[n]["type"] == "intercept") ++n;
      if (n == events_.size()) return false;
      const auto& r = events_[n];
      if (r["type"] != "receive" || r["hop"] != events_[k]["hop"] || r["from"] != events_[k]["from"] ||
          r["to"] != events_[k]["to"]) {
        return false;
      }
    }
    return true;
  }

 private:
  std::vector<Json> events_;
};

// ---------------------------------------------------------------------------
// Shot machine with branch cache

/// Checkpoint states keyed by the outcomes that lead to them.
class BranchCache {
 public:
  struct Checkpoint {
    Checkpoint(qsim::StateVector s, std::vector<std::string> regs, std::vector<double> probs)
        : state(std::move(s)), registers(std::move(regs)), probabilities(std::move(probs)) {}

    qsim::StateVector state;
    std::vector<std::string> registers;  // empty at the end of the program
    std::vector<double> probabilities;
    mutable std::once_flag evaluated;
    mutable double value = 0.0;
  };

  std::shared_ptr<const Checkpoint> find(const std::vector<std::size_t>& outcomes) const {
    std::lock_guard lock(mu_);
    auto it = map_.find(outcomes);
    return it == map_.end() ? nullptr : it->second;
  }

  void insert(const std::vector<std::size_t>& outcomes, std::shared_ptr<const Checkpoint> cp) {
    std::lock_guard lock(mu_);
    map_.emplace(outcomes, std::move(cp));
  }

  std::size_t size() const {
    std::lock_guard lock(mu_);
    return map_.size();
  }

 private:
  mutable std::mutex mu_;
  std::map<std::vector<std::size_t>, std::shared_ptr<const Checkpoint>> map_;
};

/// Executes one shot of a program: gates via op(), draws via measure().
class Machine {
 public:
  Machine(qsim::RegisterLayout layout, Rng& rng, Transcript* transcript, BranchCache* cache)
      : layout_(std::move(layout)), rng_(rng), transcript_(transcript), cache_(cache) {
    if (cache_) checkpoint_ = cache_->find(outcomes_);
    if (!checkpoint_) state_.emplace(layout_);
  }

  const qsim::RegisterLayout& layout() const noexcept { return layout_; }
  Rng& rng() noexcept { return rng_; }

  void note(const std::string& type, const Json& fields = Json::object()) {
    if (transcript_) transcript_->record(type, fields);
  }

  /// Records the event and applies f unless the result is already cached.
  template <class F>
  void op(const std::string& type, const Json& fields, F&& f) {
    note(type, fields);
    if (state_) f(*state_);
  }

  qsim::MeasurementResult measure(const std::string& actor, const std::vector<std::string>& regs) {
    std::shared_ptr<const BranchCache::Checkpoint> cp = checkpoint_;
    std::vector<double> probs;
    if (cp) {
      if (cp->registers != regs) throw InternalError("branch cache: program is not deterministic");
    } else {
      probs = state_->marginal(regs);
      if (cache_) {
        auto fresh = std::make_shared<BranchCache::Checkpoint>(*state_, regs, probs);
        cache_->insert(outcomes_, fresh);
        cp = fresh;
      }
    }
    const auto& p = cp ? cp->probabilities : probs;
    const std::uint64_t draws_before = rng_.draws();
    const std::size_t key = qsim::StateVector::sample_outcome(p, rng_.uniform_real());
    const double prob = p[key];

    outcomes_.push_back(key);
    std::shared_ptr<const BranchCache::Checkpoint> next = cache_ ? cache_->find(outcomes_) : nullptr;
    if (next) {
      checkpoint_ = std::move(next);
      state_.reset();
    } else {
      if (!state_) state_.emplace(cp->state);
      state_->collapse(regs, key);
      checkpoint_.reset();
    }
    qsim::MeasurementResult res{split_key(regs, key), prob};
    if (transcript_) {
      Json values = Json::object();
      for (std::size_t k = 0; k < regs.size(); ++k) values[regs[k]] = res.values[k];
      transcript_->record("measure", {{"actor", actor},
                                      {"registers", regs},
                                      {"outcome", values},
                                      {"probability", prob},
                                      {"rng_seed", rng_.seed()},
                                      {"rng_draws_before", draws_before}});
    }
    return res;
  }

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

  /// Final state of the shot.
  const qsim::StateVector& finish() {
    if (checkpoint_) {
      if (!checkpoint_->registers.empty()) throw InternalError("branch cache: program ended early");
      return checkpoint_->state;
    }
    if (cache_) {
      auto fresh = std::make_shared<BranchCache::Checkpoint>(*state_, std::vector<std::string>{}, std::vector<double>{});
      cache_->insert(outcomes_, fresh);
      checkpoint_ = cache_->find(outcomes_);
      state_.reset();
      return checkpoint_->state;
    }
    return *state_;
  }

  /// f(final state), evaluated once per cached final state.
  template <class F>
  double final_value(F&& f) {
    const auto& s = finish();
    if (!checkpoint_) return f(s);
    std::call_once(checkpoint_->evaluated, [&] { checkpoint_->value = f(s); });
    return checkpoint_->value;
  }

 private:
  qsim::RegisterLayout layout_;
  Rng& rng_;
  Transcript* transcript_;
  BranchCache* cache_;
  std::vector<std::size_t> outcomes_;
  std::shared_ptr<const BranchCache::Checkpoint> checkpoint_;
  std::optional<qsim::StateVector> state_;
};

/// Runs shot(k, rng, transcript_or_null) for k < shots; shot 0 gets the transcript.
template <class Record, class ShotFn>
std::vector<Record> run_shots(std::uint64_t shots, std::uint64_t seed, unsigned threads, Transcript& transcript,
                              ShotFn&& shot) {
  if (shots == 0) throw InvalidArgument("shots must be >= 1");
  std::vector<Record> out(shots);
  auto one = [&](std::uint64_t k) {
    Rng rng(shot_seed(seed, k));
    out[k] = shot(k, rng, k == 0 ? &transcript : nullptr);
  };
  const unsigned workers = std::max(1U, std::min<unsigned>(threads, static_cast<unsigned>(shots)));
  if (workers == 1) {
    for (std::uint64_t k = 0; k < shots; ++k) one(k);
    return out;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::uint64_t k = w; k < shots; k += workers) one(k);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

// ---------------------------------------------------------------------------
// Hops

struct Hop {
  std::size_t index;
  std::size_t from;
  std::size_t to;
  bool outbound;
};

inline std::size_t hop_count(std::size_t chain_length) { return 2 * (chain_length - 1); }

inline Hop hop(std::size_t chain_length, std::size_t h) {
  const std::size_t L = chain_length;
  if (h >= hop_count(L)) {
    throw InvalidArgument("hop " + std::to_string(h) + " outside 0.." + std::to_string(hop_count(L) - 1));
  }
  if (h < L - 1) return {h, L - 1 - h, L - 2 - h, true};
  const std::size_t k = h - (L - 1);
  return {h, k, k + 1, false};
}

/// What actor `to` does to a classical j on arriving through hop h.
inline Residue arrival_shift(const std::vector<Actor>& chain, const Hop& hp, Residue j) {
  const Actor& t = chain[hp.to];
  if (hp.outbound) return t.apply(j);
  if (t.role == Role::Intermediary) return t.apply(j, -1);
  return j;
}

/// Classical value travelling through hop h when the receiver started from j_start.
inline Residue classical_j_at_hop(const std::vector<Actor>& chain, Residue j_start, std::size_t h) {
  Residue j = j_start;
  for (std::size_t k = 0; k < h; ++k) j = arrival_shift(chain, hop(chain.size(), k), j);
  return j;
}

/// Attacker action at one hop: measure the listed in-transit registers.
struct Interception {
  std::size_t hop;
  std::vector<std::string> registers{"j"};
};

struct Observation {
  std::size_t hop;
  std::optional<std::uint64_t> index;
  Residue j;
};

inline Json observation_json(const Observation& o) {
  Json e;
  e["hop"] = o.hop;
  if (o.index) e["i"] = *o.index;
  e["j"] = o.j;
  return e;
}

// ---------------------------------------------------------------------------
// Run configuration

struct RunConfig {
  std::string fixture;
  std::vector<std::string> chain;
  std::map<std::string, Secret> secrets;
  int procedure = 3;
  std::uint64_t omega = 0;
  std::uint64_t Omega = 1;
  std::string message = "0000";
  std::uint64_t seed = 0;
  std::uint64_t shots = 1;
  bool transmit_index = false;
  std::optional<std::uint64_t> sobol_scramble_seed;
  std::string mapper = "rsq";
  unsigned threads = 1;
  bool branch_cache = true;
};

inline Json to_json(const RunConfig& c) {
  Json out;
  out["fixture"] = c.fixture;
  out["chain"] = c.chain;
  Json secrets = Json::object();
  for (const auto& [name, s] : c.secrets) secrets[name] = {{"cycle", s.cycle}, {"steps", s.steps}};
  out["secrets"] = secrets;
  out["procedure"] = c.procedure;
  out["omega"] = c.omega;
  out["Omega"] = c.Omega;
  out["message"] = c.message;
  out["seed"] = c.seed;
  out["shots"] = c.shots;
  out["transmit_index"] = c.transmit_index;
  out["scrambled_sobol"] = c.sobol_scramble_seed.has_value();
  if (c.sobol_scramble_seed) out["sobol_scramble_seed"] = *c.sobol_scramble_seed;
  out["mapper"] = c.mapper;
  return out;
}

namespace detail {

template <class T>
T config_field(const nlohmann::json& doc, const std::string& key, const std::string& path, T fallback) {
  if (!doc.contains(key)) return fallback;
  const auto& v = doc.at(key);
  if constexpr (std::is_same_v<T, bool>) {
    if (!v.is_boolean()) throw LoadError(path + "." + key + ": expected true or false");
    return v.get<bool>();
  } else if constexpr (std::is_same_v<T, std::string>) {
    if (!v.is_string()) throw LoadError(path + "." + key + ": expected a string");
    return v.get<std::string>();
  } else if constexpr (std::is_unsigned_v<T>) {
    if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
      if (!v.is_number_unsigned()) throw LoadError(path + "." + key + ": expected a non-negative integer");
    }
    return static_cast<T>(v.get<std::uint64_t>());
  } else {
    if (!v.is_number_integer()) throw LoadError(path + "." + key + ": expected an integer");
    return static_cast<T>(v.get<std::int64_t>());
  }
}

}  // namespace detail

/// Parses a run configuration; relative fixture paths resolve against base_dir.
inline RunConfig parse_run_config(const nlohmann::json& doc, const std::filesystem::path& base_dir = {}) {
  const std::string root = "config";
  if (!doc.is_object()) throw LoadError(root + ": expected a JSON object");
  static const std::set<std::string> known = {"fixture", "chain",          "secrets",          "procedure",
                                              "omega",   "Omega",          "message",          "seed",
                                              "shots",   "transmit_index", "scrambled_sobol",  "sobol_scramble_seed",
                                              "mapper",  "threads",        "branch_cache"};
  for (const auto& [k, _] : doc.items()) {
    if (!known.count(k)) throw LoadError(root + "." + k + ": unknown field");
  }
  RunConfig c;
  c.fixture = detail::config_field<std::string>(doc, "fixture", root, "");
  if (c.fixture.empty()) throw LoadError(root + ".fixture: required");
  if (!base_dir.empty() && std::filesystem::path(c.fixture).is_relative()) {
    c.fixture = (base_dir / c.fixture).lexically_normal().string();
  }
  if (!doc.contains("chain") || !doc.at("chain").is_array()) throw LoadError(root + ".chain: expected a list of actor names");
  for (std::size_t k = 0; k < doc.at("chain").size(); ++k) {
    const auto& v = doc.at("chain")[k];
    if (!v.is_string()) throw LoadError(root + ".chain[" + std::to_string(k) + "]: expected a string");
    c.chain.push_back(v.get<std::string>());
  }
  if (doc.contains("secrets")) {
    const auto& s = doc.at("secrets");
    if (!s.is_object()) throw LoadError(root + ".secrets: expected an object");
    for (const auto& [name, v] : s.items()) {
      const std::string path = root + ".secrets." + name;
      if (!v.is_object()) throw LoadError(path + ": expected {\"cycle\": ..., \"steps\": ...}");
      Secret sec;
      sec.cycle = detail::config_field<std::string>(v, "cycle", path, name);
      sec.steps = detail::config_field<long long>(v, "steps", path, 1);
      c.secrets[name] = sec;
    }
  }
  c.procedure = detail::config_field<int>(doc, "procedure", root, 3);
  if (c.procedure != 1 && c.procedure != 3 && c.procedure != 4) throw LoadError(root + ".procedure: must be 1, 3 or 4");
  c.omega = detail::config_field<std::uint64_t>(doc, "omega", root, 0);
  c.Omega = detail::config_field<std::uint64_t>(doc, "Omega", root, 1);
  c.message = detail::config_field<std::string>(doc, "message", root, "0000");
  c.seed = detail::config_field<std::uint64_t>(doc, "seed", root, 0);
  c.shots = detail::config_field<std::uint64_t>(doc, "shots", root, 1);
  if (c.shots == 0) throw LoadError(root + ".shots: must be >= 1");
  c.transmit_index = detail::config_field<bool>(doc, "transmit_index", root, false);
  if (detail::config_field<bool>(doc, "scrambled_sobol", root, false)) {
    c.sobol_scramble_seed = detail::config_field<std::uint64_t>(doc, "sobol_scramble_seed", root, 0);
  }
  c.mapper = detail::config_field<std::string>(doc, "mapper", root, "rsq");
  if (c.mapper != "rsq" && c.mapper != "naive") throw LoadError(root + ".mapper: must be \"rsq\" or \"naive\"");
  c.threads = detail::config_field<unsigned>(doc, "threads", root, 1);
  c.branch_cache = detail::config_field<bool>(doc, "branch_cache", root, true);
  try {
    basis_message(c.message);
  } catch (const InvalidArgument& e) {
    throw LoadError(root + ".message: " + e.what());
  }
  return c;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open config '" + path + "'");
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::parse_error& e) {
    throw LoadError("config '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_run_config(doc, std::filesystem::path(path).parent_path());
}

// ---------------------------------------------------------------------------
// Shared run context

struct Context {
  scheme::TablePtr table;
  std::vector<Actor> chain;
  unsigned j_width;
  std::vector<SessionKey> keys;  // keys[k] between chain[k] and chain[k+1]

  const Actor& sender() const { return chain.front(); }
  const Actor& receiver() const { return chain.back(); }
  Residue expected_key() const { return sender().apply(table->j0()); }
};

inline Context make_context(scheme::TablePtr table, const std::vector<std::string>& names,
                            const std::map<std::string, Secret>& secrets) {
  if (names.size() < 3) throw InvalidArgument("chain needs at least 3 actors (sender, intermediary, receiver)");
  Context ctx{table, build_chain(table, names, secrets), ceil_log2(table->p()), {}};
  if (ctx.j_width == 0) ctx.j_width = 1;
  for (std::size_t k = 0; k + 1 < ctx.chain.size(); ++k) ctx.keys.push_back(dh_session_key(ctx.chain[k], ctx.chain[k + 1]));
  return ctx;
}

inline Json context_json(const Context& ctx) {
  Json out;
  out["fixture"] = {{"discriminant", ctx.table->discriminant()}, {"p", ctx.table->p()}, {"r", ctx.table->order()},
                    {"j0", ctx.table->j0()}};
  Json actors = Json::array();
  for (const auto& a : ctx.chain) {
    actors.push_back({{"name", a.name}, {"role", to_string(a.role)}, {"cycle", a.action.actor}, {"steps", a.steps}});
  }
  out["actors"] = actors;
  Json keys = Json::array();
  for (const auto& k : ctx.keys) keys.push_back({{"pair", {k.x, k.y}}, {"j", k.j}});
  out["session_keys"] = keys;
  return out;
}

inline Json layout_json(const qsim::RegisterLayout& l) {
  Json out = Json::array();
  for (const auto& r : l.registers()) out.push_back({{"name", r.name}, {"offset", r.offset}, {"width", r.width}});
  return out;
}

// ---------------------------------------------------------------------------
// Procedure 1 (classical walkthrough)

struct Procedure1Result {
  Transcript transcript;
  Residue recovered;
  Residue expected;
  /// Value in transit at every hop.
  std::vector<Residue> hop_values;
  Json context;

  Json to_json() const {
    Json out;
    out["procedure"] = 1;
    for (const auto& [k, v] : context.items()) out[k] = v;
    out["events"] = transcript.to_json();
    out["hop_values"] = hop_values;
    out["recovered_key"] = recovered;
    out["expected_key"] = expected;
    return out;
  }
};

inline Procedure1Result run_procedure1(const Context& ctx) {
  Procedure1Result res{{}, 0, ctx.expected_key(), {}, context_json(ctx)};
  Transcript& t = res.transcript;
  const auto L = ctx.chain.size();
  const Actor& recv = ctx.receiver();
  Residue j = recv.apply(ctx.table->j0());
  t.record("oracle", {{"actor", recv.name}, {"oracle", "shift"}, {"direction", "forward"}, {"power", 1},
                      {"input", ctx.table->j0()}, {"output", j}});
  for (std::size_t h = 0; h < hop_count(L); ++h) {
    const Hop hp = hop(L, h);
    const auto& from = ctx.chain[hp.from].name;
    const auto& to = ctx.chain[hp.to].name;
    res.hop_values.push_back(j);
    t.record("send", {{"hop", h}, {"from", from}, {"to", to}, {"value", j}});
    t.record("receive", {{"hop", h}, {"from", from}, {"to", to}, {"value", j}});
    const Residue next = arrival_shift(ctx.chain, hp, j);
    if (next != j || ctx.chain[hp.to].role != Role::Receiver) {
      t.record("oracle", {{"actor", to},
                          {"oracle", "shift"},
                          {"direction", hp.outbound ? "forward" : "inverse"},
                          {"power", 1},
                          {"input", j},
                          {"output", next}});
    }
    j = next;
  }
  res.recovered = recv.apply(j, -1);
  t.record("oracle", {{"actor", recv.name}, {"oracle", "shift"}, {"direction", "inverse"}, {"power", 1}, {"input", j},
                      {"output", res.recovered}});
  t.record("recover", {{"actor", recv.name}, {"key", res.recovered}});
  return res;
}

// ---------------------------------------------------------------------------
// Procedure 3

struct Procedure3Params {
  std::uint64_t omega = 0;
  std::uint64_t Omega = 1;
  /// Message state on M qubits (2^M amplitudes).
  std::vector<Amplitude> message = basis_message("0000");
  std::uint64_t seed = 0;
  std::uint64_t shots = 1;
  bool transmit_index = false;
  std::optional<std::uint64_t> sobol_scramble_seed;
  std::vector<Interception> interceptions;
  unsigned threads = 1;
  bool branch_cache = true;
};

struct ShotRecord {
  std::uint64_t shot = 0;
  std::string raw;
  std::uint64_t index = 0;
  Residue measured_j = 0;
  Residue recovered = 0;
  double message_fidelity = 0.0;
  std::vector<Observation> observations;
};

struct Procedure3Result {
  Transcript transcript;
  std::vector<ShotRecord> shots;
  Residue expected;
  qsim::RegisterLayout layout;
  Json context;
  Json params;

  std::map<std::string, std::uint64_t> raw_histogram() const {
    std::map<std::string, std::uint64_t> h;
    for (const auto& s : shots) ++h[s.raw];
    return h;
  }

  bool all_recovered() const {
    return std::all_of(shots.begin(), shots.end(), [&](const ShotRecord& s) { return s.recovered == expected; });
  }

  Json to_json() const {
    Json out;
    out["procedure"] = 3;
    for (const auto& [k, v] : context.items()) out[k] = v;
    out["parameters"] = params;
    out["layout"] = layout_json(layout);
    out["events"] = transcript.to_json();
    out["recovered_key"] = shots.front().recovered;
    out["expected_key"] = expected;

    Json records = Json::array();
    std::map<Residue, std::uint64_t> keys;
    std::vector<std::uint64_t> index_counts(params["Omega"].get<std::uint64_t>(), 0);
    double min_fid = 1.0;
    for (const auto& s : shots) {
      Json r{{"shot", s.shot}, {"raw", s.raw}, {"i", s.index}, {"j", s.measured_j}, {"recovered", s.recovered},
             {"message_fidelity", s.message_fidelity}};
      if (!s.observations.empty()) {
        Json obs = Json::array();
        for (const auto& o : s.observations) obs.push_back(observation_json(o));
        r["observations"] = obs;
      }
      records.push_back(std::move(r));
      ++keys[s.recovered];
      if (s.index < index_counts.size()) ++index_counts[s.index];
      min_fid = std::min(min_fid, s.message_fidelity);
    }
    Json stats;
    stats["shots"] = shots.size();
    Json raw = Json::object();
    for (const auto& [k, v] : raw_histogram()) raw[k] = v;
    stats["raw_histogram"] = raw;
    Json kh = Json::object();
    for (const auto& [k, v] : keys) kh[std::to_string(k)] = v;
    stats["recovered_histogram"] = kh;
    stats["all_recovered"] = all_recovered();
    stats["min_message_fidelity"] = min_fid;
    stats["index_histogram"] = index_counts;
    if (index_counts.size() >= 2) {
      const auto chi = stats::chi_square_uniform(index_counts);
      stats["index_uniformity"] = {{"chi_square", chi.statistic}, {"dof", chi.degrees_of_freedom}, {"p_value", chi.p_value}};
    }
    out["statistics"] = stats;
    out["shot_records"] = records;
    return out;
  }
};

namespace detail {

inline void check_size(const qsim::RegisterLayout& l) {
  if (l.total_qubits() > qsim::kDefaultQubitGuard) {
    throw ResourceError(std::to_string(l.total_qubits()) + " qubits exceed the guard of " +
                        std::to_string(qsim::kDefaultQubitGuard));
  }
}

inline void load_basis(qsim::StateVector& s, const std::string& reg, std::uint64_t value) {
  const auto qs = s.layout().qubits(reg);
  for (std::size_t k = 0; k < qs.size(); ++k)
    if ((value >> k) & 1U) s.x(qs[k]);
}

/// H on the index register, plus the exact filter or direct preparation when
/// omega is not a power of two. Returns the method used.
inline std::string prepare_index(qsim::StateVector& s, std::uint64_t omega, bool allow_filter = true) {
  const auto& r = s.layout().reg("i");
  const std::uint64_t full = std::uint64_t{1} << r.width;
  if (omega == 1) return "none";
  if (omega == full) {
    s.h(s.layout().qubits("i"));
    return "hadamard";
  }
  if (allow_filter && 2 * omega > full) {
    s.h(s.layout().qubits("i"));
    s.grover_filter(omega, "i", s.layout().qubit("anc", 0));
    return "hadamard+grover_filter";
  }
  s.prepare_uniform("i", omega);
  return "direct_preparation";
}

inline std::string index_method(unsigned q, std::uint64_t omega) {
  const std::uint64_t full = std::uint64_t{1} << q;
  if (omega == 1) return "none";
  if (omega == full) return "hadamard";
  if (2 * omega > full) return "hadamard+grover_filter";
  return "direct_preparation";
}

inline std::string raw_bits(const qsim::RegisterLayout& l, const std::vector<std::uint64_t>& i_anc_j) {
  return qsim::bits_msb_first(i_anc_j[2], l.reg("j").width) + " " + qsim::bits_msb_first(i_anc_j[1], 1) + " " +
         qsim::bits_msb_first(i_anc_j[0], l.reg("i").width);
}

inline Json oracle_fields(const Actor& a, const char* oracle, bool forward, long long power,
                          const std::string& reg = "j") {
  return {{"actor", a.name}, {"oracle", oracle}, {"direction", forward ? "forward" : "inverse"},
          {"power", power},  {"register", reg}};
}

}  // namespace detail

inline Procedure3Result run_procedure3(const Context& ctx, const Procedure3Params& prm) {
  const std::size_t L = ctx.chain.size();
  const std::uint64_t r = ctx.table->order();
  if (prm.omega >= r) throw InvalidArgument("omega must satisfy 0 <= omega < r = " + std::to_string(r));
  if (prm.Omega == 0 || prm.Omega > r - prm.omega) {
    throw InvalidArgument("Omega must satisfy 1 <= Omega <= r - omega = " + std::to_string(r - prm.omega));
  }
  const std::size_t msize = prm.message.size();
  if (msize < 2 || !std::has_single_bit(msize)) throw InvalidArgument("message state size must be a power of two");
  const auto M = static_cast<unsigned>(std::countr_zero(msize));

  const unsigned Q = std::max(1U, ceil_log2(prm.Omega));
  qsim::RegisterLayout layout;
  layout.add("i", Q).add("anc", 1).add("j", ctx.j_width).add("m", M);
  detail::check_size(layout);

  std::map<std::size_t, const Interception*> intercepts;
  for (const auto& ic : prm.interceptions) {
    hop(L, ic.hop);
    for (const auto& reg : ic.registers) {
      if (reg == "i" && !prm.transmit_index) {
        throw InvalidArgument("the index register never leaves the receiver unless it is transmitted");
      }
      if (reg != "i" && reg != "j") throw InvalidArgument("attackers can only measure the i or j register");
    }
    if (!intercepts.emplace(ic.hop, &ic).second) throw InvalidArgument("hop intercepted twice");
  }

  const MessageCircuit circuit(ctx.table->p(), M, prm.sobol_scramble_seed);
  const Actor& S = ctx.sender();
  const Actor& R = ctx.receiver();
  const Residue j0 = ctx.table->j0();
  const Residue jA = ctx.expected_key();
  const auto idx_qubits = layout.qubits("i");

  std::vector<qsim::PermutationGate> forward, inverse;
  for (const auto& a : ctx.chain) {
    forward.push_back(a.shift_gate(ctx.j_width));
    inverse.push_back(forward.back().inverse());
  }
  const auto mapper = qsim::repeated_squaring_schedule(forward.back(), idx_qubits);

  BranchCache cache;
  Procedure3Result res;
  res.expected = jA;
  res.layout = layout;
  res.context = context_json(ctx);
  Json params;
  params["omega"] = prm.omega;
  params["Omega"] = prm.Omega;
  params["message_width"] = M;
  params["seed"] = prm.seed;
  params["shots"] = prm.shots;
  params["transmit_index"] = prm.transmit_index;
  params["scrambled_sobol"] = prm.sobol_scramble_seed.has_value();
  params["index_preparation"] = detail::index_method(Q, prm.Omega);
  Json ics = Json::array();
  for (const auto& ic : prm.interceptions) ics.push_back({{"hop", ic.hop}, {"registers", ic.registers}});
  params["interceptions"] = ics;
  res.params = params;

  auto shot = [&](std::uint64_t k, Rng& rng, Transcript* tr) {
    Machine m(layout, rng, tr, prm.branch_cache ? &cache : nullptr);
    ShotRecord rec;
    rec.shot = k;

    m.op("prepare", {{"actor", R.name}, {"register", "i"}, {"method", detail::index_method(Q, prm.Omega)},
                     {"Omega", prm.Omega}},
         [&](qsim::StateVector& s) { detail::prepare_index(s, prm.Omega); });
    m.op("load", {{"actor", R.name}, {"register", "j"}, {"value", j0}},
         [&](qsim::StateVector& s) { detail::load_basis(s, "j", j0); });
    if (prm.omega > 0) {
      m.op("oracle", detail::oracle_fields(R, "shift", true, static_cast<long long>(prm.omega)),
           [&](qsim::StateVector& s) { s.apply_permutation(R.shift_gate(ctx.j_width, static_cast<long long>(prm.omega)), "j"); });
    }
    m.op("oracle",
         {{"actor", R.name}, {"oracle", "mapper"}, {"schedule", "repeated_squaring"}, {"controls", "i"}, {"register", "j"}},
         [&](qsim::StateVector& s) { s.apply_controlled_permutation(mapper, "j"); });

    for (std::size_t h = 0; h < hop_count(L); ++h) {
      const Hop hp = hop(L, h);
      const Actor& from = ctx.chain[hp.from];
      const Actor& to = ctx.chain[hp.to];
      std::vector<std::string> regs;
      if (prm.transmit_index) regs.push_back("i");
      regs.push_back("j");
      if (!hp.outbound) regs.push_back("m");
      m.note("send", {{"hop", h}, {"from", from.name}, {"to", to.name}, {"registers", regs}});
      if (auto it = intercepts.find(h); it != intercepts.end()) {
        const auto mr = m.measure("attacker", it->second->registers);
        Observation ob{h, std::nullopt, 0};
        for (std::size_t q = 0; q < it->second->registers.size(); ++q) {
          if (it->second->registers[q] == "i") ob.index = mr.values[q];
          if (it->second->registers[q] == "j") ob.j = mr.values[q];
        }
        rec.observations.push_back(ob);
        m.note("intercept", {{"hop", h}, {"mode", "measure-and-resend"}, {"observed", observation_json(ob)}});
      }
      m.note("receive", {{"hop", h}, {"from", from.name}, {"to", to.name}, {"registers", regs}});

      if (hp.outbound) {
        m.op("oracle", detail::oracle_fields(to, "shift", true, 1),
             [&](qsim::StateVector& s) { s.apply_permutation(forward[hp.to], "j"); });
        if (to.role == Role::Sender) {
          m.op("attach_message", {{"actor", to.name}, {"register", "m"}},
               [&](qsim::StateVector& s) { s.prepare_register("m", prm.message); });
          m.op("message", {{"actor", to.name}, {"operation", "encrypt"}, {"layer", "payload"}, {"key", jA}},
               [&](qsim::StateVector& s) { circuit.encrypt(s, "m", jA); });
          const Residue jt = ctx.keys[0].j;
          m.op("message", {{"actor", to.name}, {"operation", "encrypt"}, {"layer", "transport"}, {"key", jt},
                           {"peer", ctx.chain[1].name}},
               [&, jt](qsim::StateVector& s) { circuit.encrypt(s, "m", jt); });
        }
      } else {
        const Residue jin = ctx.keys[hp.from].j;
        if (to.role == Role::Intermediary) {
          m.op("oracle", detail::oracle_fields(to, "shift", false, 1),
               [&](qsim::StateVector& s) { s.apply_permutation(inverse[hp.to], "j"); });
        }
        m.op("message", {{"actor", to.name}, {"operation", "decrypt"}, {"layer", "transport"}, {"key", jin},
                         {"peer", from.name}},
             [&, jin](qsim::StateVector& s) { circuit.decrypt(s, "m", jin); });
        if (to.role == Role::Intermediary) {
          const Residue jout = ctx.keys[hp.to].j;
          m.op("message", {{"actor", to.name}, {"operation", "encrypt"}, {"layer", "transport"}, {"key", jout},
                           {"peer", ctx.chain[hp.to + 1].name}},
               [&, jout](qsim::StateVector& s) { circuit.encrypt(s, "m", jout); });
        }
      }
    }

    const auto first = m.measure(R.name, {"i", "anc", "j"});
    rec.index = first.values[0];
    rec.measured_j = first.values[2];
    rec.raw = detail::raw_bits(layout, first.values);
    m.note("raw_measurement", {{"actor", R.name}, {"bits", rec.raw}, {"order", "j anc i"}});

    const auto back = static_cast<long long>(rec.index + prm.omega);
    m.op("oracle", detail::oracle_fields(R, "shift", false, back),
         [&](qsim::StateVector& s) { s.apply_permutation(R.shift_gate(ctx.j_width, -back), "j"); });
    const auto key = m.measure(R.name, {"j"});
    rec.recovered = key.values[0];
    m.note("recover", {{"actor", R.name},
                       {"key", rec.recovered},
                       {"classical_check", uncompute_key(rec.index, prm.omega, rec.measured_j, R)}});
    const Residue recovered = rec.recovered;
    m.op("message", {{"actor", R.name}, {"operation", "decrypt"}, {"layer", "payload"}, {"key", recovered}},
         [&, recovered](qsim::StateVector& s) {
           if (recovered < ctx.table->p()) circuit.decrypt(s, "m", recovered);
         });
    rec.message_fidelity =
        m.final_value([&](const qsim::StateVector& fin) { return fin.register_fidelity("m", prm.message); });
    m.note("message_fidelity", {{"actor", R.name}, {"fidelity", rec.message_fidelity}});
    return rec;
  };

  res.shots = run_shots<ShotRecord>(prm.shots, prm.seed, prm.threads, res.transcript, shot);
  return res;
}

// ---------------------------------------------------------------------------
// Procedure 4

enum class MapperKind { RepeatedSquaring, Naive };

struct Procedure4Params {
  std::uint64_t seed = 0;
  std::uint64_t shots = 1;
  MapperKind mapper = MapperKind::RepeatedSquaring;
  unsigned threads = 1;
  bool branch_cache = true;
  /// Receives a copy of the state just before the final measurement (shot 0).
  qsim::StateVector* capture_state = nullptr;
};

struct Procedure4Shot {
  std::uint64_t shot = 0;
  Residue j = 0;
};

struct Procedure4Result {
  Transcript transcript;
  std::vector<Procedure4Shot> shots;
  Residue expected;
  qsim::RegisterLayout layout;
  Json context;
  Json params;

  bool all_recovered() const {
    return std::all_of(shots.begin(), shots.end(), [&](const Procedure4Shot& s) { return s.j == expected; });
  }

  Json to_json() const {
    Json out;
    out["procedure"] = 4;
    for (const auto& [k, v] : context.items()) out[k] = v;
    out["parameters"] = params;
    out["layout"] = layout_json(layout);
    out["events"] = transcript.to_json();
    out["recovered_key"] = shots.front().j;
    out["expected_key"] = expected;
    std::map<Residue, std::uint64_t> h;
    for (const auto& s : shots) ++h[s.j];
    Json kh = Json::object();
    for (const auto& [k, v] : h) kh[std::to_string(k)] = v;
    out["statistics"] = {{"shots", shots.size()}, {"recovered_histogram", kh}, {"all_recovered", all_recovered()}};
    Json rec = Json::array();
    for (const auto& s : shots) rec.push_back({{"shot", s.shot}, {"j", s.j}});
    out["shot_records"] = rec;
    return out;
  }
};

inline Procedure4Result run_procedure4(const Context& ctx, const Procedure4Params& prm) {
  const std::size_t L = ctx.chain.size();
  const std::uint64_t r = ctx.table->order();
  const unsigned Q = std::max(1U, ceil_log2(r));
  qsim::RegisterLayout layout;
  layout.add("i", Q).add("anc", 1).add("j", ctx.j_width);
  detail::check_size(layout);

  const Actor& R = ctx.receiver();
  const Residue j0 = ctx.table->j0();
  const auto idx = layout.qubits("i");
  std::vector<qsim::PermutationGate> forward, inverse;
  for (const auto& a : ctx.chain) {
    forward.push_back(a.shift_gate(ctx.j_width));
    inverse.push_back(forward.back().inverse());
  }
  const auto mapper = prm.mapper == MapperKind::RepeatedSquaring
                          ? qsim::repeated_squaring_schedule(forward.back(), idx)
                          : qsim::naive_shift_schedule(forward.back(), idx);
  std::vector<qsim::ControlledStage> unmapper;
  for (auto it = mapper.rbegin(); it != mapper.rend(); ++it) unmapper.push_back({it->control, it->gate.inverse()});
  const char* schedule = prm.mapper == MapperKind::RepeatedSquaring ? "repeated_squaring" : "naive";

  BranchCache cache;
  Procedure4Result res;
  res.expected = ctx.expected_key();
  res.layout = layout;
  res.context = context_json(ctx);
  res.params = {{"seed", prm.seed},
                {"shots", prm.shots},
                {"mapper", schedule},
                {"index_preparation", detail::index_method(Q, r)},
                {"Omega", r}};

  auto shot = [&](std::uint64_t k, Rng& rng, Transcript* tr) {
    Machine m(layout, rng, tr, prm.branch_cache ? &cache : nullptr);
    m.op("prepare", {{"actor", R.name}, {"register", "i"}, {"method", detail::index_method(Q, r)}, {"Omega", r}},
         [&](qsim::StateVector& s) { detail::prepare_index(s, r); });
    m.op("load", {{"actor", R.name}, {"register", "j"}, {"value", j0}},
         [&](qsim::StateVector& s) { detail::load_basis(s, "j", j0); });
    m.op("oracle", {{"actor", R.name}, {"oracle", "mapper"}, {"schedule", schedule}, {"controls", "i"}, {"register", "j"}},
         [&](qsim::StateVector& s) { s.apply_controlled_permutation(mapper, "j"); });
    for (std::size_t h = 0; h < hop_count(L); ++h) {
      const Hop hp = hop(L, h);
      const Actor& from = ctx.chain[hp.from];
      const Actor& to = ctx.chain[hp.to];
      m.note("send", {{"hop", h}, {"from", from.name}, {"to", to.name}, {"registers", {"j"}}});
      m.note("receive", {{"hop", h}, {"from", from.name}, {"to", to.name}, {"registers", {"j"}}});
      if (hp.outbound) {
        m.op("oracle", detail::oracle_fields(to, "shift", true, 1),
             [&](qsim::StateVector& s) { s.apply_permutation(forward[hp.to], "j"); });
      } else if (to.role == Role::Intermediary) {
        m.op("oracle", detail::oracle_fields(to, "shift", false, 1),
             [&](qsim::StateVector& s) { s.apply_permutation(inverse[hp.to], "j"); });
      }
    }
    m.op("oracle",
         {{"actor", R.name}, {"oracle", "mapper"}, {"schedule", schedule}, {"direction", "inverse"}, {"controls", "i"},
          {"register", "j"}},
         [&](qsim::StateVector& s) { s.apply_controlled_permutation(unmapper, "j"); });
    if (k == 0 && prm.capture_state) {
      // Materialise the pre-measurement state once for inspection.
      qsim::StateVector s(layout);
      detail::prepare_index(s, r);
      detail::load_basis(s, "j", j0);
      s.apply_controlled_permutation(mapper, "j");
      for (std::size_t h = 0; h < hop_count(L); ++h) {
        const Hop hp = hop(L, h);
        if (hp.outbound) {
          s.apply_permutation(forward[hp.to], "j");
        } else if (ctx.chain[hp.to].role == Role::Intermediary) {
          s.apply_permutation(inverse[hp.to], "j");
        }
      }
      s.apply_controlled_permutation(unmapper, "j");
      *prm.capture_state = std::move(s);
    }
    const auto out = m.measure(R.name, {"j"});
    m.note("recover", {{"actor", R.name}, {"key", out.values[0]}});
    m.finish();
    return Procedure4Shot{k, out.values[0]};
  };
  res.shots = run_shots<Procedure4Shot>(prm.shots, prm.seed, prm.threads, res.transcript, shot);
  return res;
}

// ---------------------------------------------------------------------------
// Config-driven entry point

inline Procedure3Params procedure3_params(const RunConfig& c) {
  Procedure3Params p;
  p.omega = c.omega;
  p.Omega = c.Omega;
  p.message = basis_message(c.message);
  p.seed = c.seed;
  p.shots = c.shots;
  p.transmit_index = c.transmit_index;
  p.sobol_scramble_seed = c.sobol_scramble_seed;
  p.threads = c.threads;
  p.branch_cache = c.branch_cache;
  return p;
}

inline Context context_from_config(const RunConfig& c) {
  return make_context(scheme::load_action_table(c.fixture), c.chain, c.secrets);
}

/// Runs the configured procedure and returns its transcript document.
inline Json run(const RunConfig& c) {
  const Context ctx = context_from_config(c);
  Json doc;
  doc["config"] = to_json(c);
  Json body;
  switch (c.procedure) {
    case 1:
      body = run_procedure1(ctx).to_json();
      break;
    case 3:
      body = run_procedure3(ctx, procedure3_params(c)).to_json();
      break;
    case 4: {
      Procedure4Params p;
      p.seed = c.seed;
      p.shots = c.shots;
      p.mapper = c.mapper == "naive" ? MapperKind::Naive : MapperKind::RepeatedSquaring;
      p.threads = c.threads;
      p.branch_cache = c.branch_cache;
      body = run_procedure4(ctx, p).to_json();
      break;
    }
    default:
      throw InvalidArgument("unknown procedure");
  }
  for (const auto& [k, v] : body.items()) doc[k] = v;
  return doc;
}

}  // namespace qor::protocol
