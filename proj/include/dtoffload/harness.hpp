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
// Experiment driver: frozen probe sets, convergence tracking during training,
// hyperparameter sweeps and the per-alpha scheme comparison, plus CSV output.

#ifndef DTOFFLOAD_HARNESS_HPP_
#define DTOFFLOAD_HARNESS_HPP_

#include <chrono>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dtoffload/ddl.hpp"
#include "dtoffload/errors.hpp"
#include "dtoffload/exact.hpp"
#include "dtoffload/parallel.hpp"
#include "dtoffload/random.hpp"
#include "dtoffload/scenario.hpp"

namespace dtoff {

// ---------------------------------------------------------------------------
// Probe set

// U0 scenarios drawn once and shared by every configuration being compared.
class ProbeSet {
 public:
  static ProbeSet create(int count, const GeneratorConfig& cfg, std::uint64_t seed) {
    if (count <= 0) throw InvalidConfig("probe set needs at least one scenario");
    check_config(cfg);
    ProbeSet p;
    p.seed_ = seed;
    p.config_ = cfg;
    p.scenarios_.reserve(count);
    for (int i = 0; i < count; ++i)
      p.scenarios_.push_back(generate_random(derive_seed(seed, streams::kProbe, i), cfg));
    return p;
  }

  std::uint64_t seed() const { return seed_; }
  const GeneratorConfig& config() const { return config_; }
  const std::vector<Scenario>& scenarios() const { return scenarios_; }
  std::size_t size() const { return scenarios_.size(); }

  // Same devices and servers, different latency weight.
  ProbeSet with_alpha(double alpha) const {
    ProbeSet p = *this;
    p.config_.params.alpha = alpha;
    check_config(p.config_);
    for (auto& s : p.scenarios_) s.params.alpha = alpha;
    return p;
  }

 private:
  std::uint64_t seed_ = 0;
  GeneratorConfig config_{};
  std::vector<Scenario> scenarios_;
};

// ---------------------------------------------------------------------------
// Convergence

// Mean of min/max over paired probe costs; 1 when nothing moved.
inline double convergence_rate(std::span<const double> old_costs, std::span<const double> new_costs) {
  if (old_costs.size() != new_costs.size()) throw ContractError("convergence_rate: length mismatch");
  if (old_costs.empty()) throw ContractError("convergence_rate: empty cost vectors");
  double sum = 0.0;
  for (std::size_t i = 0; i < old_costs.size(); ++i) {
    const double a = old_costs[i];
    const double b = new_costs[i];
    if (!(a > 0) || !(b > 0)) throw DomainError("convergence_rate: costs must be positive");
    sum += std::min(a, b) / std::max(a, b);
  }
  return sum / static_cast<double>(old_costs.size());
}

// ---------------------------------------------------------------------------
// Training experiments

struct GridPoint {
  std::string label;
  DdlConfig ddl{};
  int iterations = 1000;
  std::uint64_t seed = 1;
};

struct ExperimentOptions {
  int eval_every = 10;  // probe evaluation cadence; 1 evaluates every iteration
  int threads = 1;
};

inline constexpr double kNotEvaluated = std::numeric_limits<double>::quiet_NaN();

struct ExperimentReport {
  GridPoint config;
  GeneratorConfig scenarios;
  std::uint64_t probe_seed = 0;
  int probe_size = 0;
  int eval_every = 10;
  TrainingTrace trace;
  // One entry per iteration; NaN where the probe set was not evaluated.
  std::vector<double> convergence;
  std::vector<double> probe_mean;
  double initial_probe_mean = 0.0;
  double final_probe_mean = 0.0;
  double train_seconds = 0.0;
  DdlEnsemble ensemble;

  // First iteration that ran a training step, 0 if none did.
  int training_start() const {
    for (const auto& r : trace)
      if (r.trained) return r.iteration;
    return 0;
  }

  // Iterations since training started until C first reached `threshold`
  // (inclusive count), or nullopt if it never did.
  std::optional<int> iterations_to_converge(double threshold = 0.99) const {
    const int start = training_start();
    if (start == 0) return std::nullopt;
    for (std::size_t i = static_cast<std::size_t>(start) - 1; i < convergence.size(); ++i)
      if (!std::isnan(convergence[i]) && convergence[i] >= threshold)
        return static_cast<int>(i) + 2 - start;
    return std::nullopt;
  }

  // Values at the evaluated iterations only, in order.
  std::vector<double> evaluated(const std::vector<double>& series) const {
    std::vector<double> out;
    for (double v : series)
      if (!std::isnan(v)) out.push_back(v);
    return out;
  }
};

inline std::vector<double> probe_costs(const EncodedScenarios& enc, const DdlEnsemble& e) {
  std::vector<double> c;
  c.reserve(enc.size());
  for (const auto& b : enc.decide(e)) c.push_back(b.cost);
  return c;
}

inline double mean(std::span<const double> v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// Trains one fresh ensemble on scenarios drawn like the probe set's and
// tracks C and the probe mean every `eval_every` iterations (and at the end).
inline ExperimentReport run_training(const GridPoint& gp, const ProbeSet& probe, const ExperimentOptions& opt = {}) {
  if (opt.eval_every <= 0) throw InvalidConfig("eval_every must be positive");
  if (gp.iterations < 0) throw InvalidConfig("iterations must be non-negative");
  check_config(gp.ddl);
  const auto& g = probe.config();
  ExperimentReport rep;
  rep.config = gp;
  rep.scenarios = g;
  rep.probe_seed = probe.seed();
  rep.probe_size = static_cast<int>(probe.size());
  rep.eval_every = opt.eval_every;
  rep.ensemble = DdlEnsemble::create(g.num_dts, g.num_edge_servers + 1, gp.ddl, gp.seed);
  ReplayDatabase db(gp.ddl.db_capacity);
  const EncodedScenarios enc(probe.scenarios(), gp.ddl.slots_per_dt, gp.ddl.scaling);

  std::vector<double> last = probe_costs(enc, rep.ensemble);
  rep.initial_probe_mean = mean(last);
  rep.final_probe_mean = rep.initial_probe_mean;
  rep.convergence.assign(gp.iterations, kNotEvaluated);
  rep.probe_mean.assign(gp.iterations, kNotEvaluated);

  TrainConfig tc;
  tc.iterations = gp.iterations;
  tc.scenarios = g;
  tc.seed = gp.seed;
  tc.threads = opt.threads;
  const auto t0 = std::chrono::steady_clock::now();
  rep.trace = train(rep.ensemble, db, tc, [&](const IterationRecord& r, const DdlEnsemble& e) {
    if (r.iteration % opt.eval_every != 0 && r.iteration != gp.iterations) return;
    auto now = probe_costs(enc, e);
    rep.convergence[r.iteration - 1] = convergence_rate(last, now);
    rep.probe_mean[r.iteration - 1] = mean(now);
    last = std::move(now);
  });
  rep.train_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (gp.iterations > 0) rep.final_probe_mean = rep.probe_mean.back();
  return rep;
}

// One report per grid point. Grid points run in parallel when threads > 1;
// each run is seeded by its own grid point, so the result does not depend on
// scheduling.
inline std::vector<ExperimentReport> run_training_experiment(const std::vector<GridPoint>& grid,
                                                             const ProbeSet& probe,
                                                             const ExperimentOptions& opt = {}) {
  if (grid.empty()) throw InvalidConfig("experiment grid is empty");
  std::vector<ExperimentReport> out(grid.size());
  const int outer = std::min<int>(std::max(opt.threads, 1), static_cast<int>(grid.size()));
  ExperimentOptions inner = opt;
  inner.threads = outer > 1 ? 1 : opt.threads;
  parallel_for(static_cast<int>(grid.size()), outer, [&](int i) {
    try {
      out[i] = run_training(grid[i], probe, inner);
    } catch (const std::exception& e) {
      throw GridPointError(i, grid[i].label, e.what());
    }
  });
  return out;
}

inline std::string format_value(double v) {
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

inline std::vector<GridPoint> learning_rate_grid(const DdlConfig& base, int iterations, std::uint64_t seed,
                                                 const std::vector<double>& rates = {1e-5, 1e-4, 1e-3, 1e-2}) {
  std::vector<GridPoint> g;
  for (double lr : rates) {
    GridPoint p{"lr=" + format_value(lr), base, iterations, seed};
    p.ddl.learning_rate = lr;
    g.push_back(std::move(p));
  }
  return g;
}

inline std::vector<GridPoint> dnn_count_grid(const DdlConfig& base, int iterations, std::uint64_t seed,
                                             const std::vector<int>& counts = {2, 4, 8, 12, 16}) {
  std::vector<GridPoint> g;
  for (int k : counts) {
    GridPoint p{"k=" + std::to_string(k), base, iterations, seed};
    p.ddl.num_dnns = k;
    g.push_back(std::move(p));
  }
  return g;
}

inline std::vector<GridPoint> db_size_grid(const DdlConfig& base, int iterations, std::uint64_t seed,
                                           const std::vector<int>& sizes = {128, 256, 512, 1024, 2048}) {
  std::vector<GridPoint> g;
  for (int n : sizes) {
    GridPoint p{"db=" + std::to_string(n), base, iterations, seed};
    p.ddl.db_capacity = n;
    p.ddl.batch_size = std::min(base.batch_size, n);
    g.push_back(std::move(p));
  }
  return g;
}

// ---------------------------------------------------------------------------
// Scheme comparison

struct ComparisonRow {
  double alpha = 0.0;
  std::string scheme;
  double mean_q = 0.0;
  double mean_t = 0.0;
  double mean_e = 0.0;
  double elapsed = 0.0;  // mean seconds per scenario
};

using ComparisonTable = std::vector<ComparisonRow>;

namespace detail {

template <typename Solve>
ComparisonRow score_scheme(double alpha, const std::string& name, const std::vector<Scenario>& probe, Solve&& solve) {
  ComparisonRow row{alpha, name};
  for (std::size_t i = 0; i < probe.size(); ++i) {
    const SchemeResult r = solve(probe[i], i);
    row.mean_q += r.cost.weighted_cost;
    row.mean_t += r.cost.total_time;
    row.mean_e += r.cost.total_energy;
    row.elapsed += r.elapsed;
  }
  const double n = static_cast<double>(probe.size());
  row.mean_q /= n;
  row.mean_t /= n;
  row.mean_e /= n;
  row.elapsed /= n;
  return row;
}

}  // namespace detail

// Rows per alpha in the order ro, co, ad, ddl, exact. The exact row is present
// whenever every probe scenario is within the enumeration cap.
inline ComparisonTable run_comparison(const ProbeSet& probe, const std::vector<double>& alphas,
                                      const std::vector<DdlEnsemble>& ensembles,
                                      std::uint64_t cap = kDefaultEnumerationCap, int threads = 1) {
  if (alphas.size() != ensembles.size()) throw ContractError("run_comparison: one ensemble per alpha");
  ComparisonTable table;
  for (std::size_t a = 0; a < alphas.size(); ++a) {
    const ProbeSet p = probe.with_alpha(alphas[a]);
    const auto& sc = p.scenarios();
    const double alpha = alphas[a];
    table.push_back(detail::score_scheme(alpha, "ro", sc, [&](const Scenario& s, std::size_t i) {
      return scheme_random(s, derive_seed(p.seed(), streams::kRandomScheme, i));
    }));
    table.push_back(detail::score_scheme(alpha, "co", sc, [](const Scenario& s, std::size_t) {
      return scheme_cloud_only(s);
    }));
    table.push_back(detail::score_scheme(alpha, "ad", sc, [](const Scenario& s, std::size_t) {
      return scheme_average_distribution(s);
    }));
    table.push_back(detail::score_scheme(alpha, "ddl", sc, [&](const Scenario& s, std::size_t) {
      return infer(s, ensembles[a]);
    }));
    const bool feasible = std::all_of(sc.begin(), sc.end(), [&](const Scenario& s) { return exact_feasible(s, cap); });
    if (feasible)
      table.push_back(detail::score_scheme(alpha, "exact", sc, [&](const Scenario& s, std::size_t) {
        return solve_exact(s, cap, threads);
      }));
  }
  return table;
}

inline const ComparisonRow* find_row(const ComparisonTable& t, double alpha, const std::string& scheme) {
  for (const auto& r : t)
    if (r.alpha == alpha && r.scheme == scheme) return &r;
  return nullptr;
}

// ---------------------------------------------------------------------------
// Output

// Columns: iteration, chosen_dnn, chosen_Q, C, mean_probe_Q, loss_0..loss_{K-1}.
// Unevaluated and untrained cells are left empty.
inline void write_trace_csv(std::ostream& os, const ExperimentReport& r) {
  const int K = r.config.ddl.num_dnns;
  os << "iteration,chosen_dnn,chosen_Q,C,mean_probe_Q";
  for (int k = 0; k < K; ++k) os << ",loss_" << k;
  os << "\n";
  os << std::setprecision(17);
  for (std::size_t i = 0; i < r.trace.size(); ++i) {
    const auto& rec = r.trace[i];
    os << rec.iteration << ',' << rec.chosen_dnn << ',' << rec.chosen_cost << ',';
    if (!std::isnan(r.convergence[i])) os << r.convergence[i];
    os << ',';
    if (!std::isnan(r.probe_mean[i])) os << r.probe_mean[i];
    for (int k = 0; k < K; ++k) {
      os << ',';
      if (rec.trained) os << rec.losses[k];
    }
    os << "\n";
  }
}

inline void write_comparison_csv(std::ostream& os, const ComparisonTable& t) {
  os << "alpha,scheme,mean_Q,mean_T,mean_E,elapsed\n";
  os << std::setprecision(17);
  for (const auto& r : t)
    os << r.alpha << ',' << r.scheme << ',' << r.mean_q << ',' << r.mean_t << ',' << r.mean_e << ',' << r.elapsed
       << "\n";
}

inline nlohmann::json to_json(const GeneratorConfig& g) {
  return {{"num_devices", g.num_devices},
          {"num_dts", g.num_dts},
          {"num_edge_servers", g.num_edge_servers},
          {"field_width", g.field_width},
          {"field_height", g.field_height},
          {"workload_min", g.workload_min},
          {"workload_max", g.workload_max},
          {"workload_in_megabytes", g.workload_in_megabytes},
          {"edge_clock_min", g.edge_clock_min},
          {"edge_clock_max", g.edge_clock_max},
          {"cloud_clock", g.cloud_clock},
          {"bandwidth", g.bandwidth},
          {"cloud_exec_energy", g.cloud_exec_energy},
          {"edge_exec_energy", g.edge_exec_energy},
          {"cloud_tx_energy", g.cloud_tx_energy},
          {"edge_tx_energy", g.edge_tx_energy},
          {"gamma", g.params.gamma},
          {"lambda_", g.params.lambda_},
          {"delta", g.params.delta},
          {"alpha", g.params.alpha},
          {"cluster_radius", g.cluster_radius},
          {"server_seed", g.server_seed},
          {"per_scenario_servers", g.per_scenario_servers},
          {"min_server_distance", g.min_server_distance},
          {"max_devices_per_dt", g.max_devices_per_dt}};
}

// Metadata sidecar for a training trace: everything needed to rerun it.
inline nlohmann::json report_metadata(const ExperimentReport& r) {
  nlohmann::json j = {{"label", r.config.label},
                      {"seed", r.config.seed},
                      {"iterations", r.config.iterations},
                      {"eval_every", r.eval_every},
                      {"probe_seed", r.probe_seed},
                      {"probe_size", r.probe_size},
                      {"ddl", to_json(r.config.ddl)},
                      {"scenarios", to_json(r.scenarios)},
                      {"initial_probe_mean_Q", r.initial_probe_mean},
                      {"final_probe_mean_Q", r.final_probe_mean},
                      {"training_start", r.training_start()}};
  if (auto n = r.iterations_to_converge()) j["iterations_to_converge"] = *n;
  return j;
}

}  // namespace dtoff

#endif  // DTOFFLOAD_HARNESS_HPP_
