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
 * @file attacks.hpp
 * @brief Eavesdroppers on the routing chain.
 *
 * An attacker sits on the transport between two actors. In measure-and-resend
 * mode it measures the in-transit j-register (and the index register when it
 * travels) in the computational basis and forwards the collapsed state. In
 * observe-classical mode it reads the classical values of Procedure 1.
 */

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "qor/errors.hpp"
#include "qor/protocol.hpp"
#include "qor/stats.hpp"

namespace qor::attacks {

using protocol::Json;
using protocol::Residue;

enum class Mode { MeasureAndResend, ObserveClassical };

inline const char* to_string(Mode m) {
  return m == Mode::MeasureAndResend ? "measure-and-resend" : "observe-classical";
}

struct InterceptPlan {
  std::vector<std::size_t> hops;
  Mode mode = Mode::MeasureAndResend;
  /// Overrides the run seed when set.
  std::optional<std::uint64_t> seed;
};

inline bool is_count(const nlohmann::json& v) {
  return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
}

inline InterceptPlan parse_plan(const nlohmann::json& doc) {
  const std::string root = "plan";
  if (!doc.is_object()) throw LoadError(root + ": expected a JSON object");
  for (const auto& [k, _] : doc.items()) {
    if (k != "hops" && k != "mode" && k != "seed") throw LoadError(root + "." + k + ": unknown field");
  }
  InterceptPlan p;
  if (!doc.contains("hops") || !doc.at("hops").is_array() || doc.at("hops").empty()) {
    throw LoadError(root + ".hops: expected a non-empty list of hop indices");
  }
  for (std::size_t k = 0; k < doc.at("hops").size(); ++k) {
    const auto& v = doc.at("hops")[k];
    if (!is_count(v)) throw LoadError(root + ".hops[" + std::to_string(k) + "]: expected a hop index");
    p.hops.push_back(v.get<std::size_t>());
  }
  if (doc.contains("mode")) {
    const auto& m = doc.at("mode");
    if (m == "measure-and-resend") {
      p.mode = Mode::MeasureAndResend;
    } else if (m == "observe-classical") {
      p.mode = Mode::ObserveClassical;
    } else {
      throw LoadError(root + ".mode: must be \"measure-and-resend\" or \"observe-classical\"");
    }
  }
  if (doc.contains("seed")) {
    if (!is_count(doc.at("seed"))) throw LoadError(root + ".seed: expected a non-negative integer");
    p.seed = doc.at("seed").get<std::uint64_t>();
  }
  return p;
}

inline InterceptPlan load_plan(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open plan '" + path + "'");
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::parse_error& e) {
    throw LoadError("plan '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_plan(doc);
}

/// j-invariants that can travel through hop h, one per index branch.
inline std::vector<Residue> hop_support(const protocol::Context& ctx, std::uint64_t omega, std::uint64_t Omega,
                                        std::size_t h) {
  std::vector<Residue> out;
  for (std::uint64_t i = 0; i < Omega; ++i) {
    const Residue start = ctx.receiver().apply(ctx.table->j0(), static_cast<long long>(i + omega));
    out.push_back(protocol::classical_j_at_hop(ctx.chain, start, h));
  }
  return out;
}

struct InterceptReport {
  std::size_t hop;
  std::string from;
  std::string to;
  std::vector<Residue> support;
  std::map<Residue, std::uint64_t> histogram;
  bool within_support = true;
  std::optional<stats::ChiSquareResult> uniformity;
  std::uint64_t shots = 0;
  std::uint64_t recovered_ok = 0;
  Residue expected_key = 0;
  Json transcript;

  bool key_unchanged() const { return recovered_ok == shots; }

  Json to_json() const {
    Json out;
    out["attack"] = to_string(Mode::MeasureAndResend);
    out["hop"] = hop;
    out["from"] = from;
    out["to"] = to;
    std::vector<Residue> sorted = support;
    std::sort(sorted.begin(), sorted.end());
    out["support"] = sorted;
    Json h = Json::object();
    for (const auto& [j, c] : histogram) h[std::to_string(j)] = c;
    out["histogram"] = h;
    out["within_support"] = within_support;
    if (uniformity) {
      out["uniformity"] = {{"chi_square", uniformity->statistic},
                           {"dof", uniformity->degrees_of_freedom},
                           {"p_value", uniformity->p_value}};
    }
    out["shots"] = shots;
    out["expected_key"] = expected_key;
    out["receiver_recovered_expected_key"] = recovered_ok;
    out["key_unchanged"] = key_unchanged();
    out["run"] = transcript;
    return out;
  }
};

/// Measure-and-resend of the j-register at a single hop of Procedure 3.
inline InterceptReport intercept_measure(const protocol::RunConfig& config, const InterceptPlan& plan) {
  if (plan.mode != Mode::MeasureAndResend) throw InvalidArgument("intercept_measure needs measure-and-resend mode");
  if (plan.hops.size() != 1) throw InvalidArgument("intercept_measure intercepts exactly one hop");
  if (config.procedure != 3) throw InvalidArgument("measure-and-resend attacks run on Procedure 3");
  const auto ctx = protocol::context_from_config(config);
  const std::size_t h = plan.hops.front();
  const auto hp = protocol::hop(ctx.chain.size(), h);

  auto params = protocol::procedure3_params(config);
  if (plan.seed) params.seed = *plan.seed;
  params.interceptions = {{h, {"j"}}};
  const auto run = protocol::run_procedure3(ctx, params);

  InterceptReport rep;
  rep.hop = h;
  rep.from = ctx.chain[hp.from].name;
  rep.to = ctx.chain[hp.to].name;
  rep.support = hop_support(ctx, config.omega, config.Omega, h);
  rep.expected_key = run.expected;
  rep.shots = run.shots.size();
  const std::set<Residue> allowed(rep.support.begin(), rep.support.end());
  for (const auto& s : run.shots) {
    const Residue j = s.observations.at(0).j;
    ++rep.histogram[j];
    if (!allowed.count(j)) rep.within_support = false;
    if (s.recovered == run.expected) ++rep.recovered_ok;
  }
  if (allowed.size() >= 2 && rep.within_support) {
    std::vector<std::uint64_t> counts;
    for (Residue j : allowed) counts.push_back(rep.histogram.count(j) ? rep.histogram.at(j) : 0);
    rep.uniformity = stats::chi_square_uniform(counts);
  }
  rep.transcript = run.to_json();
  return rep;
}

/// Classical values read off the wire of Procedure 1.
inline Json observe_classical(const protocol::RunConfig& config, const InterceptPlan& plan) {
  if (plan.mode != Mode::ObserveClassical) throw InvalidArgument("observe_classical needs observe-classical mode");
  if (config.procedure != 1) throw InvalidArgument("observe-classical attacks run on Procedure 1");
  const auto ctx = protocol::context_from_config(config);
  const auto run = protocol::run_procedure1(ctx);
  Json obs = Json::array();
  for (std::size_t h : plan.hops) {
    const auto hp = protocol::hop(ctx.chain.size(), h);
    obs.push_back({{"hop", h},
                   {"from", ctx.chain[hp.from].name},
                   {"to", ctx.chain[hp.to].name},
                   {"value", run.hop_values.at(h)}});
  }
  Json out;
  out["attack"] = to_string(Mode::ObserveClassical);
  out["observations"] = obs;
  out["recovered_key"] = run.recovered;
  out["run"] = run.to_json();
  return out;
}

struct EndpointPair {
  std::uint64_t first_i;
  Residue first_j;
  std::uint64_t last_i;
  Residue last_j;
};

struct EndpointReport {
  std::size_t first_hop;
  std::size_t last_hop;
  std::vector<EndpointPair> pairs;
  std::uint64_t Omega = 1;
  bool same_index = true;
  bool sender_shift_links = true;
  std::vector<std::uint64_t> index_histogram;
  std::optional<stats::ChiSquareResult> index_uniformity;

  /// The instance left to the attacker: a class-group element taking j0 to the first observation.
  std::string residual_instance(Residue j0) const {
    return "find m with m * " + std::to_string(j0) + " = " + std::to_string(pairs.front().first_j);
  }

  Json to_json(Residue j0) const {
    Json out;
    out["attack"] = "endpoint-correlation";
    out["hops"] = {first_hop, last_hop};
    out["same_index"] = same_index;
    out["last_is_sender_shift_of_first"] = sender_shift_links;
    out["index_histogram"] = index_histogram;
    if (index_uniformity) {
      out["index_uniformity"] = {{"chi_square", index_uniformity->statistic},
                                 {"dof", index_uniformity->degrees_of_freedom},
                                 {"p_value", index_uniformity->p_value}};
    }
    out["residual_instance"] = residual_instance(j0);
    Json p = Json::array();
    for (const auto& e : pairs) {
      p.push_back({{"first", {{"i", e.first_i}, {"j", e.first_j}}}, {"last", {{"i", e.last_i}, {"j", e.last_j}}}});
    }
    out["pairs"] = p;
    return out;
  }
};

/// Measures (i, j) on the first and the last hop; needs the index register on the wire.
inline EndpointReport endpoint_correlation(const protocol::RunConfig& config) {
  if (!config.transmit_index) throw InvalidArgument("endpoint correlation needs the transmit-index flag");
  if (config.procedure != 3) throw InvalidArgument("endpoint correlation runs on Procedure 3");
  const auto ctx = protocol::context_from_config(config);
  auto params = protocol::procedure3_params(config);
  const std::size_t last = protocol::hop_count(ctx.chain.size()) - 1;
  params.interceptions = {{0, {"i", "j"}}, {last, {"i", "j"}}};
  const auto run = protocol::run_procedure3(ctx, params);

  EndpointReport rep;
  rep.first_hop = 0;
  rep.last_hop = last;
  rep.Omega = config.Omega;
  rep.index_histogram.assign(config.Omega, 0);
  for (const auto& s : run.shots) {
    const auto& a = s.observations.at(0);
    const auto& b = s.observations.at(1);
    EndpointPair e{*a.index, a.j, *b.index, b.j};
    if (e.first_i != e.last_i) rep.same_index = false;
    if (ctx.sender().apply(e.first_j) != e.last_j) rep.sender_shift_links = false;
    if (e.first_i < config.Omega) ++rep.index_histogram[e.first_i];
    rep.pairs.push_back(e);
  }
  if (config.Omega >= 2) rep.index_uniformity = stats::chi_square_uniform(rep.index_histogram);
  return rep;
}

}  // namespace qor::attacks
