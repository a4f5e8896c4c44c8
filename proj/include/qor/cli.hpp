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
 * @file cli.hpp
 * @brief The `qor` command line.
 *
 * Subcommands: demo5, run, attack, spectra, export-graph, classgroup.
 * run_cli() takes the arguments without the program name and writes to the
 * given streams, so the whole front end can be driven from tests.
 *
 * Exit codes: 0 success, 1 a protocol check failed (wrong key, attack
 * invariant), 2 bad input (arguments, configs, fixtures), 3 resource guard,
 * 4 internal invariant violation.
 */

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "qor/attacks.hpp"
#include "qor/classgroup.hpp"
#include "qor/errors.hpp"
#include "qor/protocol.hpp"
#include "qor/scheme.hpp"

#ifndef QOR_DATA_DIR
#define QOR_DATA_DIR "data"
#endif

namespace qor::cli {

using protocol::Json;

inline std::string default_fixture() { return std::string(QOR_DATA_DIR) + "/fixtures/cl167_p311.json"; }

namespace detail {

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f || !(f << content)) throw ResourceError("cannot write '" + path.string() + "'");
}

/// Accepts U+2212 MINUS SIGN as an ASCII minus.
inline std::string normalise_minus(std::string s) {
  static const std::string minus = "\xE2\x88\x92";
  for (std::size_t pos; (pos = s.find(minus)) != std::string::npos;) s.replace(pos, minus.size(), "-");
  return s;
}

inline classgroup::Integer parse_integer(const std::string& s, const std::string& what) {
  const std::string t = normalise_minus(s);
  const std::size_t start = (!t.empty() && (t[0] == '-' || t[0] == '+')) ? 1 : 0;
  if (t.size() == start || t.find_first_not_of("0123456789", start) != std::string::npos) {
    throw InvalidArgument(what + ": '" + s + "' is not an integer");
  }
  return classgroup::Integer(t);
}

inline classgroup::QuadraticForm parse_form(const std::vector<std::string>& v, std::size_t at) {
  return classgroup::QuadraticForm(parse_integer(v.at(at), "a"), parse_integer(v.at(at + 1), "b"),
                                   parse_integer(v.at(at + 2), "c"));
}

inline std::string histogram_csv(const std::map<std::string, std::uint64_t>& h) {
  std::string out = "outcome,count\n";
  for (const auto& [k, v] : h) out += k + "," + std::to_string(v) + "\n";
  return out;
}

inline std::string format_double(double x) {
  if (std::abs(x) < 5e-13) x = 0.0;
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12f", x);
  return buf;
}

inline unsigned default_threads() { return std::max(1U, std::thread::hardware_concurrency()); }

// -- subcommands ------------------------------------------------------------

struct Demo5Options {
  std::uint64_t shots = 10000;
  std::uint64_t seed = 7;
  std::string out_dir = "qor-demo5";
  std::string fixture = default_fixture();
  unsigned threads = default_threads();
};

inline int demo5(const Demo5Options& o, std::ostream& out, std::ostream& err) {
  protocol::RunConfig c;
  c.fixture = o.fixture;
  c.chain = {"a", "b", "c", "d", "e"};
  c.procedure = 3;
  c.omega = 2;
  c.Omega = 5;
  c.message = "0101";
  c.seed = o.seed;
  c.shots = o.shots;
  c.threads = o.threads;
  const auto ctx = protocol::context_from_config(c);
  const auto res = protocol::run_procedure3(ctx, protocol::procedure3_params(c));

  Json doc;
  doc["config"] = protocol::to_json(c);
  const Json body = res.to_json();
  for (const auto& [k, v] : body.items()) doc[k] = v;
  const std::filesystem::path dir(o.out_dir);
  write_file(dir / "demo5_transcript.json", doc.dump(2) + "\n");
  write_file(dir / "demo5_histogram.csv", histogram_csv(res.raw_histogram()));

  std::uint64_t ok = 0;
  for (const auto& s : res.shots) ok += s.recovered == res.expected ? 1 : 0;
  out << "first measurement (j anc i):\n";
  for (const auto& [k, v] : res.raw_histogram()) out << "  " << k << "  " << v << "\n";
  out << "recovered key: " << res.shots.front().recovered << " (" << ok << "/" << res.shots.size()
      << " shots recovered " << res.expected << ")\n";
  out << "wrote " << (dir / "demo5_transcript.json").string() << " and " << (dir / "demo5_histogram.csv").string()
      << "\n";
  if (ok != res.shots.size()) {
    err << "error: " << res.shots.size() - ok << " shots did not recover " << res.expected << "\n";
    return 1;
  }
  return 0;
}

struct RunOptions {
  std::string config;
  std::string out;
  std::string histogram;
  std::optional<std::uint64_t> shots;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  bool transmit_index = false;
};

inline protocol::RunConfig load_config(const std::string& path, const std::optional<std::uint64_t>& shots,
                                       const std::optional<std::uint64_t>& seed, const std::optional<unsigned>& threads,
                                       bool transmit_index) {
  auto c = protocol::load_run_config(path);
  if (shots) c.shots = *shots;
  if (seed) c.seed = *seed;
  if (threads) c.threads = *threads;
  if (transmit_index) c.transmit_index = true;
  if (c.shots == 0) throw InvalidArgument("--shots must be >= 1");
  return c;
}

inline int run(const RunOptions& o, std::ostream& out, std::ostream& err) {
  const auto c = load_config(o.config, o.shots, o.seed, o.threads, o.transmit_index);
  const Json doc = protocol::run(c);
  const std::string text = doc.dump(2) + "\n";
  if (!o.histogram.empty()) {
    std::map<std::string, std::uint64_t> h;
    if (doc.contains("statistics") && doc["statistics"].contains("raw_histogram")) {
      for (const auto& [k, v] : doc["statistics"]["raw_histogram"].items()) h[k] = v.get<std::uint64_t>();
    } else if (doc.contains("statistics")) {
      for (const auto& [k, v] : doc["statistics"]["recovered_histogram"].items()) h[k] = v.get<std::uint64_t>();
    }
    write_file(o.histogram, histogram_csv(h));
  }
  if (o.out.empty()) {
    out << text;
  } else {
    write_file(o.out, text);
    out << "procedure " << c.procedure << ": recovered key " << doc["recovered_key"] << " (expected "
        << doc["expected_key"] << ")\n";
    out << "wrote " << o.out << "\n";
  }
  const bool ok = doc.contains("statistics") ? doc["statistics"]["all_recovered"].get<bool>()
                                             : doc["recovered_key"] == doc["expected_key"];
  if (!ok) {
    err << "error: the receiver did not recover the sender key on every shot\n";
    return 1;
  }
  return 0;
}

struct AttackOptions {
  std::string config;
  std::string plan;
  std::string out;
  bool endpoint = false;
  std::optional<std::uint64_t> shots;
  std::optional<std::uint64_t> seed;
  bool transmit_index = false;
};

inline int attack(const AttackOptions& o, std::ostream& out, std::ostream& err) {
  const auto c = load_config(o.config, o.shots, o.seed, std::nullopt, o.transmit_index);
  Json report;
  bool ok = true;
  std::string summary;
  if (o.endpoint) {
    const auto rep = attacks::endpoint_correlation(c);
    const auto ctx = protocol::context_from_config(c);
    report = rep.to_json(ctx.table->j0());
    ok = rep.same_index && rep.sender_shift_links;
    summary = "endpoint correlation: same index on every shot: " + std::string(rep.same_index ? "yes" : "no") +
              "; residual instance: " + rep.residual_instance(ctx.table->j0());
  } else {
    if (o.plan.empty()) throw InvalidArgument("attack needs --plan (or --endpoint-correlation)");
    const auto plan = attacks::load_plan(o.plan);
    if (plan.mode == attacks::Mode::ObserveClassical) {
      report = attacks::observe_classical(c, plan);
      summary = "observed " + std::to_string(plan.hops.size()) + " classical hand-offs";
    } else {
      const auto rep = attacks::intercept_measure(c, plan);
      report = rep.to_json();
      ok = rep.within_support && rep.key_unchanged();
      std::ostringstream s;
      s << "hop " << rep.hop << " (" << rep.from << " -> " << rep.to << "): " << rep.histogram.size()
        << " distinct j observed over " << rep.shots << " shots";
      if (rep.uniformity) s << ", chi-square p = " << rep.uniformity->p_value;
      s << "; receiver key unchanged: " << (rep.key_unchanged() ? "yes" : "no");
      summary = s.str();
    }
  }
  const std::string text = report.dump(2) + "\n";
  if (o.out.empty()) {
    out << text;
  } else {
    write_file(o.out, text);
    out << summary << "\nwrote " << o.out << "\n";
  }
  if (!ok) {
    err << "error: attack invariant violated\n";
    return 1;
  }
  return 0;
}

inline int spectra(int n, const std::string& format, std::ostream& out) {
  const auto sp = scheme::spectral(n);
  const auto d = static_cast<int>(sp.eigenvalue.rows());
  if (format == "json") {
    Json doc;
    doc["n"] = n;
    Json rows = Json::array();
    for (int s = 0; s < d; ++s) {
      Json row = Json::array();
      for (int c = 0; c < d; ++c) row.push_back(sp.eigenvalue(c, s));
      rows.push_back(row);
    }
    doc["eigenvalues"] = rows;
    doc["layout"] = "eigenvalues[s][i] is the eigenvalue of A_i on the range of E_s";
    out << doc.dump(2) << "\n";
    return 0;
  }
  if (format != "csv") throw InvalidArgument("spectra: --format must be csv or json");
  out << "s";
  for (int c = 0; c < d; ++c) out << ",A" << c;
  out << "\n";
  for (int s = 0; s < d; ++s) {
    out << s;
    for (int c = 0; c < d; ++c) out << "," << format_double(sp.eigenvalue(c, s));
    out << "\n";
  }
  return 0;
}

inline int export_graph(const std::string& fixture, const std::string& cycle, const std::string& format,
                        std::ostream& out) {
  const auto table = scheme::load_action_table(fixture);
  out << scheme::export_graph(*table, cycle, scheme::parse_graph_format(format));
  return 0;
}

inline int classgroup_cmd(const std::string& op, const std::vector<std::string>& args, std::uint64_t seed,
                          unsigned word_length, std::ostream& out) {
  namespace cg = qor::classgroup;
  auto need = [&](std::size_t n, const char* usage) {
    if (args.size() != n) throw InvalidArgument(std::string("usage: classgroup ") + op + " " + usage);
  };
  if (op == "class-number") {
    need(1, "D");
    out << cg::class_number(cg::Discriminant(parse_integer(args[0], "D"))) << "\n";
  } else if (op == "enumerate") {
    need(1, "D");
    for (const auto& f : cg::enumerate_reduced(cg::Discriminant(parse_integer(args[0], "D")))) out << f << "\n";
  } else if (op == "reduce") {
    need(3, "a b c");
    out << cg::reduce(parse_form(args, 0)) << "\n";
  } else if (op == "compose") {
    need(6, "a1 b1 c1 a2 b2 c2");
    out << cg::compose(parse_form(args, 0), parse_form(args, 3)) << "\n";
  } else if (op == "inverse") {
    need(3, "a b c");
    out << cg::inverse(parse_form(args, 0)) << "\n";
  } else if (op == "power") {
    need(4, "a b c n");
    out << cg::power(parse_form(args, 0), parse_integer(args[3], "n")) << "\n";
  } else if (op == "random") {
    if (args.size() != 1 && args.size() != 4) throw InvalidArgument("usage: classgroup random D [a b c]");
    const cg::Discriminant d(parse_integer(args[0], "D"));
    const auto forms = cg::enumerate_reduced(d);
    cg::QuadraticForm g = forms.front();
    if (args.size() == 4) {
      g = cg::reduce(parse_form(args, 1));
      if (g.discriminant_value() != d.value()) throw InvalidArgument("generator has a different discriminant");
    } else {
      for (const auto& f : forms) {
        if (!(f == cg::principal_form(d))) {
          g = f;
          break;
        }
      }
    }
    const std::uint64_t r = forms.size();
    cg::RandomElementParams p{g, r, cg::default_num_exponents(r), word_length, seed};
    const auto e = cg::random_element(p);
    Json doc;
    doc["generator"] = g.to_string();
    doc["group_order"] = r;
    doc["seed"] = seed;
    doc["exponents"] = e.exponents;
    doc["word"] = e.word;
    doc["exponent"] = e.exponent;
    doc["element"] = e.element.to_string();
    out << doc.dump(2) << "\n";
  } else {
    throw InvalidArgument("unknown classgroup operation '" + op + "'");
  }
  return 0;
}

}  // namespace detail

/// Runs the command line; `args` excludes the program name.
inline int run_cli(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  for (auto& a : args) a = detail::normalise_minus(std::move(a));

  CLI::App app{"Quantum onion routing simulator", "qor"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "qor 1.0.0");

  detail::Demo5Options demo;
  auto* demo5 = app.add_subcommand("demo5", "Five-actor worked example (omega = 2, Omega = 5)");
  demo5->add_option("--shots", demo.shots, "Number of shots")->check(CLI::PositiveNumber)->capture_default_str();
  demo5->add_option("--seed", demo.seed, "Run seed")->capture_default_str();
  demo5->add_option("--out-dir", demo.out_dir, "Directory for the transcript and histogram")->capture_default_str();
  demo5->add_option("--fixture", demo.fixture, "Action-table fixture")->capture_default_str();
  demo5->add_option("--threads", demo.threads, "Worker threads")->check(CLI::PositiveNumber);

  detail::RunOptions ro;
  auto* run = app.add_subcommand("run", "Run a JSON configuration");
  run->add_option("--config", ro.config, "Run configuration (JSON)")->required();
  run->add_option("--out", ro.out, "Transcript file (default: standard output)");
  run->add_option("--histogram", ro.histogram, "Histogram CSV file");
  run->add_option("--shots", ro.shots, "Override the configured shot count");
  run->add_option("--seed", ro.seed, "Override the configured seed");
  run->add_option("--threads", ro.threads, "Worker threads");
  run->add_flag("--transmit-index", ro.transmit_index, "Send the index register along with j");

  detail::AttackOptions ao;
  auto* attack = app.add_subcommand("attack", "Run an eavesdropper against a configuration");
  attack->add_option("--config", ao.config, "Run configuration (JSON)")->required();
  attack->add_option("--plan", ao.plan, "Intercept plan (JSON)");
  attack->add_flag("--endpoint-correlation", ao.endpoint, "Measure (i, j) on the first and the last hop");
  attack->add_option("--out", ao.out, "Report file (default: standard output)");
  attack->add_option("--shots", ao.shots, "Override the configured shot count");
  attack->add_option("--seed", ao.seed, "Override the configured seed");
  attack->add_flag("--transmit-index", ao.transmit_index, "Send the index register along with j");

  int spectra_n = 0;
  std::string spectra_format = "csv";
  auto* spectra = app.add_subcommand("spectra", "Eigenvalues of the cyclic association scheme of order n");
  spectra->add_option("n", spectra_n, "Scheme order")->required();
  spectra->add_option("--format", spectra_format, "csv or json")->capture_default_str();

  std::string graph_fixture, graph_cycle = "all", graph_format = "dot";
  auto* graph = app.add_subcommand("export-graph", "Export the cycle graph of a fixture");
  graph->add_option("fixture", graph_fixture, "Action-table fixture")->required();
  graph->add_option("cycle", graph_cycle, "Cycle name or 'all'")->capture_default_str();
  graph->add_option("format,--format", graph_format, "dot or csv")->capture_default_str();

  std::string cg_op;
  std::vector<std::string> cg_args;
  std::uint64_t cg_seed = 0;
  unsigned cg_m = 8;
  auto* cg = app.add_subcommand("classgroup", "Class-group utilities");
  cg->add_option("op", cg_op, "class-number | enumerate | reduce | compose | inverse | power | random")->required();
  cg->add_option("args", cg_args, "Operation arguments");
  cg->add_option("--seed", cg_seed, "Seed for 'random'");
  cg->add_option("--word-length", cg_m, "Word length m for 'random'")->check(CLI::PositiveNumber);

  try {
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? 0 : 2;
  }

  try {
    if (*demo5) return detail::demo5(demo, out, err);
    if (*run) return detail::run(ro, out, err);
    if (*attack) return detail::attack(ao, out, err);
    if (*spectra) return detail::spectra(spectra_n, spectra_format, out);
    if (*graph) return detail::export_graph(graph_fixture, graph_cycle, graph_format, out);
    if (*cg) return detail::classgroup_cmd(cg_op, cg_args, cg_seed, cg_m, out);
  } catch (const LoadError& e) {
    err << "load error: " << e.what() << "\n";
    return 2;
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const ResourceError& e) {
    err << "resource error: " << e.what() << "\n";
    return 3;
  } catch (const InternalError& e) {
    err << "internal error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 4;
  }
  return 2;
}

}  // namespace qor::cli
