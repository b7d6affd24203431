// Copyright 2026 The dtoffload Authors
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
// Command-line front end: generate, train, solve, experiment.

#ifndef DTOFFLOAD_CLI_HPP_
#define DTOFFLOAD_CLI_HPP_

#include <algorithm>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dtoffload/ddl.hpp"
#include "dtoffload/errors.hpp"
#include "dtoffload/exact.hpp"
#include "dtoffload/harness.hpp"
#include "dtoffload/parallel.hpp"
#include "dtoffload/scenario.hpp"

namespace dtoff::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

class UsageError : public InvalidConfig {
 public:
  using InvalidConfig::InvalidConfig;
};

inline const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names = {"lr-sweep", "dnn-sweep", "dbsize-sweep", "alpha-compare"};
  return names;
}

struct GlobalFlags {
  std::uint64_t seed = 1;
  int threads = default_threads();
  std::string out = ".";
};

// Scenario-shape and physics flags shared by every subcommand that draws
// scenarios.
struct ScenarioFlags {
  int devices = 120;
  int dts = 15;
  int servers = 3;
  double alpha = 0.5;
  double gamma = PhysicalParams{}.gamma;
  double lambda = PhysicalParams{}.lambda_;
  double delta = PhysicalParams{}.delta;
  double cluster_radius = 0.0;
  std::int64_t server_seed = -1;  // -1: use --seed
  int max_per_dt = GeneratorConfig{}.max_devices_per_dt;

  void attach(CLI::App* app) {
    app->add_option("--devices", devices, "Number of devices N")->capture_default_str();
    app->add_option("--dts", dts, "Number of digital twins M")->capture_default_str();
    app->add_option("--servers", servers, "Number of edge servers S")->capture_default_str();
    app->add_option("--alpha", alpha, "Latency weight in the weighted cost")->capture_default_str();
    app->add_option("--gamma", gamma, "Cloud network discount")->capture_default_str();
    app->add_option("--lambda", lambda, "Edge rate numerator (Mbps*m)")->capture_default_str();
    app->add_option("--delta", delta, "Instructions per data unit")->capture_default_str();
    app->add_option("--cluster-radius", cluster_radius, "Std-dev of per-DT device clusters, 0 = uniform")
        ->capture_default_str();
    app->add_option("--server-seed", server_seed, "Seed of the edge-server pool (default: --seed)");
    app->add_option("--max-per-dt", max_per_dt, "Cap on devices per DT, 0 = none")->capture_default_str();
  }

  GeneratorConfig config(std::uint64_t seed) const {
    GeneratorConfig g;
    g.num_devices = devices;
    g.num_dts = dts;
    g.num_edge_servers = servers;
    g.params.alpha = alpha;
    g.params.gamma = gamma;
    g.params.lambda_ = lambda;
    g.params.delta = delta;
    g.cluster_radius = cluster_radius;
    g.server_seed = server_seed >= 0 ? static_cast<std::uint64_t>(server_seed) : seed;
    g.max_devices_per_dt = max_per_dt;
    check_config(g);
    return g;
  }
};

struct DdlFlags {
  int k = 12;
  double lr = 1e-3;
  int db = 1024;
  int batch = 128;
  int interval = 1;
  int slots = 16;
  std::string head = "identity";

  void attach(CLI::App* app) {
    app->add_option("--k", k, "Number of decision networks")->capture_default_str();
    app->add_option("--lr", lr, "Adam learning rate")->capture_default_str();
    app->add_option("--db", db, "Replay database capacity")->capture_default_str();
    app->add_option("--batch", batch, "Training batch size")->capture_default_str();
    app->add_option("--interval", interval, "Train every this many iterations")->capture_default_str();
    app->add_option("--slots", slots, "Padded device slots per DT")->capture_default_str();
    app->add_option("--extractor-head", head, "Extractor output activation")
        ->check(CLI::IsMember({"identity", "sigmoid"}))
        ->capture_default_str();
  }

  DdlConfig config(const GeneratorConfig& g) const {
    DdlConfig c;
    c.num_dnns = k;
    c.learning_rate = lr;
    c.db_capacity = db;
    c.batch_size = batch;
    c.train_interval = interval;
    c.slots_per_dt = slots;
    c.extractor_head = activation_from_string(head);
    c.scaling = FeatureScaling::from(g);
    if (g.max_devices_per_dt == 0 || g.max_devices_per_dt > slots)
      throw InvalidConfig("--max-per-dt must lie in [1, --slots] when training");
    try {
      check_config(c);
    } catch (const ContractError& e) {
      throw InvalidConfig(e.what());
    }
    return c;
  }
};

namespace detail {

inline std::filesystem::path ensure_dir(const std::string& dir) {
  std::filesystem::path p(dir);
  std::error_code ec;
  std::filesystem::create_directories(p, ec);
  if (ec || !std::filesystem::is_directory(p)) throw IoError("cannot create output directory " + dir);
  return p;
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f << text;
  f.flush();
  if (!f) throw IoError("write to " + path.string() + " failed");
}

inline std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot read " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

inline std::string dump(const nlohmann::json& j) { return j.dump(2) + "\n"; }

inline std::string trace_text(const ExperimentReport& r) {
  std::ostringstream os;
  write_trace_csv(os, r);
  return os.str();
}

inline std::string file_label(std::string s) {
  std::replace(s.begin(), s.end(), '=', '_');
  return s;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Subcommands

struct GenerateFlags {
  int count = 1;
  ScenarioFlags scenario;
};

inline void cmd_generate(const GlobalFlags& gf, const GenerateFlags& f, std::ostream& out) {
  if (f.count <= 0) throw InvalidConfig("--count must be positive");
  const GeneratorConfig g = f.scenario.config(gf.seed);
  const auto dir = detail::ensure_dir(gf.out);
  nlohmann::json files = nlohmann::json::array();
  for (int i = 0; i < f.count; ++i) {
    const std::uint64_t seed = gf.seed + static_cast<std::uint64_t>(i);
    const auto path = dir / ("scenario_" + std::to_string(seed) + ".json");
    detail::write_file(path, to_document(generate_random(seed, g)));
    files.push_back(path.filename().string());
    out << path.string() << "\n";
  }
  detail::write_file(dir / "generate_meta.json",
                     detail::dump({{"command", "generate"},
                                   {"seed", gf.seed},
                                   {"count", f.count},
                                   {"generator", to_json(g)},
                                   {"files", files}}));
}

struct TrainFlags {
  int iters = 1000;
  int probe = 256;
  int eval_every = 10;
  ScenarioFlags scenario;
  DdlFlags ddl;
};

inline void cmd_train(const GlobalFlags& gf, const TrainFlags& f, std::ostream& out) {
  if (f.iters < 0) throw InvalidConfig("--iters must be non-negative");
  const GeneratorConfig g = f.scenario.config(gf.seed);
  const DdlConfig c = f.ddl.config(g);
  const auto dir = detail::ensure_dir(gf.out);
  const ProbeSet probe = ProbeSet::create(f.probe, g, gf.seed);
  const GridPoint gp{"train", c, f.iters, gf.seed};
  const ExperimentReport rep = run_training(gp, probe, {f.eval_every, gf.threads});
  detail::write_file(dir / "checkpoint.json", detail::dump(rep.ensemble.to_json()));
  detail::write_file(dir / "training_trace.csv", detail::trace_text(rep));
  auto meta = report_metadata(rep);
  meta["command"] = "train";
  meta["train_seconds"] = rep.train_seconds;
  detail::write_file(dir / "training_meta.json", detail::dump(meta));
  out << "trained " << c.num_dnns << " networks for " << f.iters << " iterations; probe mean Q "
      << rep.initial_probe_mean << " -> " << rep.final_probe_mean << "\n";
}

struct SolveFlags {
  std::string scenario;
  std::string scheme = "exact";
  std::string checkpoint;
  std::uint64_t cap = kDefaultEnumerationCap;
};

inline void cmd_solve(const GlobalFlags& gf, const SolveFlags& f, std::ostream& out) {
  if (f.scheme == "ddl" && f.checkpoint.empty()) throw UsageError("--scheme ddl requires --checkpoint");
  const Scenario s = from_document(detail::read_file(f.scenario));
  SchemeResult r;
  if (f.scheme == "exact") {
    r = solve_exact(s, f.cap, gf.threads);
  } else if (f.scheme == "ro") {
    r = scheme_random(s, derive_seed(gf.seed, streams::kRandomScheme));
  } else if (f.scheme == "co") {
    r = scheme_cloud_only(s);
  } else if (f.scheme == "ad") {
    r = scheme_average_distribution(s);
  } else {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(detail::read_file(f.checkpoint));
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(e.what(), "byte " + std::to_string(e.byte));
    }
    r = infer(s, DdlEnsemble::from_json(j));
  }
  nlohmann::json j = {{"scheme", r.scheme_name},
                      {"decision", r.decision.assignment},
                      {"cost", summary_json(r.cost)},
                      {"elapsed_seconds", r.elapsed}};
  out << detail::dump(j);
}

struct ExperimentFlags {
  std::string name;
  int iters = 3000;
  int probe = 256;
  int eval_every = 10;
  bool full = false;
  std::vector<double> alphas = {0.0, 0.25, 0.5, 0.75, 1.0};
  ScenarioFlags scenario;
  DdlFlags ddl;
};

inline void cmd_experiment(const GlobalFlags& gf, ExperimentFlags f, std::ostream& out) {
  if (!f.full) {
    // Desk scale keeps the exhaustive oracle available.
    f.scenario.devices = std::min(f.scenario.devices, 24);
    f.scenario.dts = std::min(f.scenario.dts, 6);
  }
  const GeneratorConfig g = f.scenario.config(gf.seed);
  const DdlConfig base = f.ddl.config(g);
  const auto dir = detail::ensure_dir((std::filesystem::path(gf.out) / f.name).string());
  const ProbeSet probe = ProbeSet::create(f.probe, g, gf.seed);
  const ExperimentOptions opt{f.eval_every, gf.threads};

  auto write_reports = [&](const std::vector<ExperimentReport>& reps) {
    std::ostringstream summary;
    summary << "label,initial_probe_Q,final_probe_Q,iterations_to_converge,train_seconds\n"
            << std::setprecision(17);
    for (const auto& r : reps) {
      const std::string stem = "training_trace_" + detail::file_label(r.config.label);
      detail::write_file(dir / (stem + ".csv"), detail::trace_text(r));
      detail::write_file(dir / (stem + ".json"), detail::dump(report_metadata(r)));
      summary << r.config.label << ',' << r.initial_probe_mean << ',' << r.final_probe_mean << ',';
      if (auto n = r.iterations_to_converge()) summary << *n;
      summary << ',' << r.train_seconds << "\n";
      out << r.config.label << ": probe mean Q " << r.initial_probe_mean << " -> " << r.final_probe_mean << "\n";
    }
    detail::write_file(dir / "summary.csv", summary.str());
  };

  nlohmann::json meta = {{"command", "experiment"},
                         {"experiment", f.name},
                         {"seed", gf.seed},
                         {"iterations", f.iters},
                         {"probe_size", f.probe},
                         {"eval_every", f.eval_every},
                         {"full_scale", f.full},
                         {"generator", to_json(g)},
                         {"ddl", to_json(base)}};

  if (f.name == "lr-sweep") {
    write_reports(run_training_experiment(learning_rate_grid(base, f.iters, gf.seed), probe, opt));
  } else if (f.name == "dnn-sweep") {
    write_reports(run_training_experiment(dnn_count_grid(base, f.iters, gf.seed), probe, opt));
  } else if (f.name == "dbsize-sweep") {
    write_reports(run_training_experiment(db_size_grid(base, f.iters, gf.seed), probe, opt));
  } else {
    // One ensemble per alpha: the labels depend on the cost weighting.
    std::vector<GridPoint> grid;
    for (double a : f.alphas) grid.push_back({"alpha=" + format_value(a), base, f.iters, gf.seed});
    std::vector<ExperimentReport> reps(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
      try {
        reps[i] = run_training(grid[i], probe.with_alpha(f.alphas[i]), opt);
      } catch (const std::exception& e) {
        throw GridPointError(static_cast<int>(i), grid[i].label, e.what());
      }
    }
    write_reports(reps);
    std::vector<DdlEnsemble> ensembles;
    for (auto& r : reps) ensembles.push_back(r.ensemble);
    const auto table = run_comparison(probe, f.alphas, ensembles, kDefaultEnumerationCap, gf.threads);
    std::ostringstream csv;
    write_comparison_csv(csv, table);
    detail::write_file(dir / "comparison.csv", csv.str());
    meta["alphas"] = f.alphas;
    meta["exact_included"] = find_row(table, f.alphas.front(), "exact") != nullptr;
    out << csv.str();
  }
  detail::write_file(dir / "experiment_meta.json", detail::dump(meta));
}

// ---------------------------------------------------------------------------
// Entry point

// Parses `args` (without the program name) and runs the chosen subcommand.
// Returns the process exit code.
inline int run(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Digital-twin offloading: scenarios, DDL training, exact and baseline solvers"};
  app.require_subcommand(1);
  app.fallthrough();
  GlobalFlags gf;
  app.add_option("--seed", gf.seed, "Master seed")->capture_default_str();
  app.add_option("--threads", gf.threads, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--out", gf.out, "Output directory")->capture_default_str();

  GenerateFlags gen;
  auto* g = app.add_subcommand("generate", "Write random scenario documents");
  g->add_option("--count", gen.count, "Number of scenarios")->capture_default_str();
  gen.scenario.attach(g);

  TrainFlags tr;
  auto* t = app.add_subcommand("train", "Train a DDL ensemble");
  t->add_option("--iters", tr.iters, "Training iterations")->capture_default_str();
  t->add_option("--probe", tr.probe, "Probe-set size")->capture_default_str();
  t->add_option("--eval-every", tr.eval_every, "Probe evaluation cadence")->capture_default_str();
  tr.scenario.attach(t);
  tr.ddl.attach(t);

  SolveFlags so;
  auto* s = app.add_subcommand("solve", "Solve one scenario with a scheme");
  s->add_option("--scenario", so.scenario, "Scenario document")->required();
  s->add_option("--scheme", so.scheme, "Scheme")
      ->check(CLI::IsMember({"exact", "ro", "co", "ad", "ddl"}))
      ->capture_default_str();
  s->add_option("--checkpoint", so.checkpoint, "Ensemble checkpoint (ddl)");
  s->add_option("--cap", so.cap, "Enumeration cap for exact")->capture_default_str();

  ExperimentFlags ex;
  auto* e = app.add_subcommand("experiment", "Run a named experiment");
  e->add_option("name", ex.name, "Experiment")->required()->check(CLI::IsMember(experiment_names()));
  e->add_option("--iters", ex.iters, "Training iterations per run")->capture_default_str();
  e->add_option("--probe", ex.probe, "Probe-set size")->capture_default_str();
  e->add_option("--eval-every", ex.eval_every, "Probe evaluation cadence")->capture_default_str();
  e->add_flag("--full", ex.full, "Full-scale scenarios (N=120, M=15)");
  e->add_option("--alphas", ex.alphas, "Latency weights for alpha-compare")->delimiter(',');
  ex.scenario.attach(e);
  ex.ddl.attach(e);

  try {
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& pe) {
    const int code = app.exit(pe, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*g) {
      cmd_generate(gf, gen, out);
    } else if (*t) {
      cmd_train(gf, tr, out);
    } else if (*s) {
      cmd_solve(gf, so, out);
    } else {
      cmd_experiment(gf, ex, out);
    }
  } catch (const UsageError& ue) {
    err << "usage error: " << ue.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& ex_) {
    err << "error: " << ex_.what() << "\n";
    return kExitFailure;
  }
  return kExitOk;
}

}  // namespace dtoff::cli

#endif  // DTOFFLOAD_CLI_HPP_
