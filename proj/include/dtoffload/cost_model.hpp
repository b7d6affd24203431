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

// Latency / energy model for DT placement on S edge servers plus one cloud.
//
// Units: workloads in data units (Mb), bandwidth in Mbps, clocks in GHz,
// distances in m, times in s, energies in mJ. The only conversion is
// GHz -> instructions/s, done in `instructions_per_second`.

#ifndef DTOFFLOAD_COST_MODEL_HPP_
#define DTOFFLOAD_COST_MODEL_HPP_

#include <algorithm>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "dtoffload/errors.hpp"
#include "dtoffload/scenario.hpp"

namespace dtoff {

inline constexpr double kMinDistance = 1.0;  // m; clamps the edge-rate singularity

inline double instructions_per_second(double ghz) { return ghz * 1e9; }

namespace detail {
inline void require_positive(double v, const char* what) {
  if (!(v > 0)) throw DomainError(std::string(what) + " must be positive");
}
}  // namespace detail

// ---------------------------------------------------------------------------
// Per-device formulas

inline double cloud_tx_time(double w, double bandwidth, double gamma) {
  detail::require_positive(w, "workload");
  detail::require_positive(bandwidth, "bandwidth");
  if (!(gamma > 0 && gamma <= 1)) throw DomainError("gamma must lie in (0,1]");
  return w / (bandwidth * gamma);
}

inline double cloud_exec_time(double w, double delta, double cloud_ghz) {
  detail::require_positive(w, "workload");
  detail::require_positive(delta, "delta");
  detail::require_positive(cloud_ghz, "clock speed");
  return delta * w / instructions_per_second(cloud_ghz);
}

inline double cloud_energy(double w, double tx_energy, double exec_energy, double delta) {
  detail::require_positive(w, "workload");
  detail::require_positive(tx_energy, "transmission energy");
  detail::require_positive(exec_energy, "execution energy");
  detail::require_positive(delta, "delta");
  return tx_energy * w + exec_energy * delta * w;
}

inline double edge_rate(const Point& device, const Point& server, double lambda) {
  detail::require_positive(lambda, "lambda");
  return lambda / std::max(distance(device, server), kMinDistance);
}

inline double edge_tx_time(double w, const Point& device, const Point& server, double lambda) {
  detail::require_positive(w, "workload");
  return w / edge_rate(device, server, lambda);
}

inline double edge_exec_time(double w, double delta, double edge_ghz) {
  return cloud_exec_time(w, delta, edge_ghz);
}

inline double edge_energy(double w, double tx_energy, double exec_energy, double delta) {
  return cloud_energy(w, tx_energy, exec_energy, delta);
}

// ---------------------------------------------------------------------------
// Decisions

// Server index per DT; index S (== num_edge) is the cloud.
struct Decision {
  std::vector<int> assignment;

  int num_dts() const { return static_cast<int>(assignment.size()); }
  friend bool operator==(const Decision&, const Decision&) = default;
  friend auto operator<=>(const Decision&, const Decision&) = default;
};

// One-hot view, row m has a single 1 at column assignment[m].
inline std::vector<std::vector<int>> to_one_hot(const Decision& d, int num_servers_total) {
  std::vector<std::vector<int>> x(d.assignment.size(), std::vector<int>(num_servers_total, 0));
  for (std::size_t m = 0; m < d.assignment.size(); ++m) x[m].at(d.assignment[m]) = 1;
  return x;
}

inline bool is_valid_decision(const Decision& d, const Scenario& s) {
  if (d.num_dts() != s.num_dts) return false;
  return std::all_of(d.assignment.begin(), d.assignment.end(),
                     [&](int a) { return a >= 0 && a < s.num_servers_total; });
}

struct CostBreakdown {
  std::vector<double> per_device_tx_time;
  std::vector<double> per_device_exec_time;
  std::vector<double> per_device_energy;
  std::vector<double> per_dt_sync_time;
  std::vector<double> per_dt_time;
  double total_time = 0.0;
  double total_energy = 0.0;
  double weighted_cost = 0.0;
};

// Flat record used for CSV rows and solve reports.
inline nlohmann::json summary_json(const CostBreakdown& c) {
  return {{"total_time", c.total_time},
          {"total_energy", c.total_energy},
          {"weighted_cost", c.weighted_cost},
          {"per_dt_time", c.per_dt_time},
          {"per_dt_sync_time", c.per_dt_sync_time}};
}

// Per-device, per-server latency and energy terms of one scenario. Building
// it is O(N*(S+1)); evaluating a decision against it is O(N). Exhaustive
// search and the DDL candidate scoring reuse one table per scenario.
class CostTable {
 public:
  explicit CostTable(const Scenario& s)
      : num_devices_(s.num_devices()),
        num_dts_(s.num_dts),
        num_servers_(s.num_servers_total),
        alpha_(s.params.alpha),
        owner_(s.devices.ownership),
        dt_size_(s.num_dts, 0) {
    if (s.num_servers_total != s.num_edge() + 1)
      throw ContractError("num_servers_total must equal S+1");
    const auto& sv = s.servers;
    const auto& dv = s.devices;
    const auto& p = s.params;
    const int S = s.num_edge();
    tx_.resize(static_cast<std::size_t>(num_devices_) * num_servers_);
    exec_.resize(tx_.size());
    energy_.resize(tx_.size());
    for (int n = 0; n < num_devices_; ++n) {
      const double w = dv.workloads[n];
      for (int e = 0; e < S; ++e) {
        const auto k = index(n, e);
        tx_[k] = edge_tx_time(w, dv.locations[n], sv.edge_locations[e], p.lambda_);
        exec_[k] = edge_exec_time(w, p.delta, sv.edge_clock_speeds[e]);
        energy_[k] = edge_energy(w, sv.edge_tx_energy, sv.edge_exec_energy[e], p.delta);
      }
      const auto k = index(n, S);
      tx_[k] = cloud_tx_time(w, dv.bandwidths[n], p.gamma);
      exec_[k] = cloud_exec_time(w, p.delta, sv.cloud_clock_speed);
      energy_[k] = cloud_energy(w, sv.cloud_tx_energy, sv.cloud_exec_energy, p.delta);
      ++dt_size_.at(owner_[n]);
    }
  }

  int num_dts() const { return num_dts_; }
  int num_servers_total() const { return num_servers_; }
  double alpha() const { return alpha_; }

  double tx_time(int n, int server) const { return tx_[index(n, server)]; }
  double exec_time(int n, int server) const { return exec_[index(n, server)]; }
  double energy(int n, int server) const { return energy_[index(n, server)]; }

  CostBreakdown evaluate(const Decision& d) const {
    check(d);
    CostBreakdown c;
    c.per_device_tx_time.resize(num_devices_);
    c.per_device_exec_time.resize(num_devices_);
    c.per_device_energy.resize(num_devices_);
    c.per_dt_sync_time.assign(num_dts_, 0.0);
    std::vector<double> exec_sum(num_dts_, 0.0);
    for (int n = 0; n < num_devices_; ++n) {
      const int m = owner_[n];
      const auto k = index(n, d.assignment[m]);
      c.per_device_tx_time[n] = tx_[k];
      c.per_device_exec_time[n] = exec_[k];
      c.per_device_energy[n] = energy_[k];
      c.per_dt_sync_time[m] = std::max(c.per_dt_sync_time[m], tx_[k]);
      exec_sum[m] += exec_[k];
      c.total_energy += energy_[k];
    }
    c.per_dt_time.resize(num_dts_);
    for (int m = 0; m < num_dts_; ++m) {
      c.per_dt_time[m] = dt_size_[m] * (c.per_dt_sync_time[m] + exec_sum[m]);
      c.total_time += c.per_dt_time[m];
    }
    c.weighted_cost = alpha_ * c.total_time + (1.0 - alpha_) * c.total_energy;
    return c;
  }

  // Same arithmetic (and operation order) as evaluate().weighted_cost,
  // without materialising the per-device vectors. `scratch` must hold
  // 2*num_dts doubles.
  double weighted_cost(std::span<const int> assignment, std::span<double> scratch) const {
    auto sync = scratch.subspan(0, num_dts_);
    auto exec_sum = scratch.subspan(num_dts_, num_dts_);
    std::fill(sync.begin(), sync.end(), 0.0);
    std::fill(exec_sum.begin(), exec_sum.end(), 0.0);
    double energy = 0.0;
    for (int n = 0; n < num_devices_; ++n) {
      const int m = owner_[n];
      const auto k = index(n, assignment[m]);
      sync[m] = std::max(sync[m], tx_[k]);
      exec_sum[m] += exec_[k];
      energy += energy_[k];
    }
    double time = 0.0;
    for (int m = 0; m < num_dts_; ++m) time += dt_size_[m] * (sync[m] + exec_sum[m]);
    return alpha_ * time + (1.0 - alpha_) * energy;
  }

  double weighted_cost(const Decision& d) const {
    check(d);
    std::vector<double> scratch(2 * static_cast<std::size_t>(num_dts_));
    return weighted_cost(d.assignment, scratch);
  }

 private:
  std::size_t index(int n, int server) const {
    return static_cast<std::size_t>(n) * num_servers_ + server;
  }
  void check(const Decision& d) const {
    if (d.num_dts() != num_dts_)
      throw ContractError("decision has " + std::to_string(d.num_dts()) + " entries, scenario has " +
                          std::to_string(num_dts_) + " DTs");
    for (int a : d.assignment)
      if (a < 0 || a >= num_servers_)
        throw ContractError("server index " + std::to_string(a) + " out of range");
  }

  int num_devices_;
  int num_dts_;
  int num_servers_;
  double alpha_;
  std::vector<int> owner_;
  std::vector<int> dt_size_;
  std::vector<double> tx_;
  std::vector<double> exec_;
  std::vector<double> energy_;
};

inline CostBreakdown evaluate(const Scenario& s, const Decision& d) {
  return CostTable(s).evaluate(d);
}

}  // namespace dtoff

#endif  // DTOFFLOAD_COST_MODEL_HPP_
