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

// Offloading environment: server pool, devices grouped into digital twins,
// and the physical constants of the latency/energy model. Also the random
// instance generator and the JSON scenario document.

#ifndef DTOFFLOAD_SCENARIO_HPP_
#define DTOFFLOAD_SCENARIO_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "dtoffload/errors.hpp"
#include "dtoffload/random.hpp"

namespace dtoff {

struct Point {
  double x = 0.0;  // m
  double y = 0.0;  // m

  friend bool operator==(const Point&, const Point&) = default;
};

inline double distance(const Point& a, const Point& b) { return std::hypot(a.x - b.x, a.y - b.y); }

struct ServerPool {
  std::vector<double> edge_clock_speeds;  // GHz, one per edge server
  double cloud_clock_speed = 3.5;         // GHz
  std::vector<Point> edge_locations;
  std::vector<double> edge_exec_energy;   // mJ per instruction, one per edge server
  double cloud_exec_energy = 0.1;         // mJ per instruction
  double edge_tx_energy = 0.125;          // mJ per data unit
  double cloud_tx_energy = 0.15;          // mJ per data unit

  int num_edge() const { return static_cast<int>(edge_clock_speeds.size()); }

  friend bool operator==(const ServerPool&, const ServerPool&) = default;
};

struct DeviceSet {
  std::vector<double> workloads;   // data units (Mb)
  std::vector<Point> locations;
  std::vector<double> bandwidths;  // Mbps
  std::vector<int> ownership;      // DT index per device

  int size() const { return static_cast<int>(workloads.size()); }

  friend bool operator==(const DeviceSet&, const DeviceSet&) = default;
};

struct PhysicalParams {
  double gamma = 0.02;    // cloud network discount, (0,1]
  double lambda_ = 1e4;   // Mbps*m, edge rate numerator
  double delta = 0.5;     // instructions per data unit
  double alpha = 0.5;     // latency weight in the weighted cost

  friend bool operator==(const PhysicalParams&, const PhysicalParams&) = default;
};

struct Scenario {
  ServerPool servers;
  DeviceSet devices;
  PhysicalParams params;
  int num_dts = 0;
  int num_servers_total = 0;  // S + 1; index S is the cloud

  int num_devices() const { return devices.size(); }
  int num_edge() const { return servers.num_edge(); }
  int cloud_index() const { return servers.num_edge(); }

  friend bool operator==(const Scenario&, const Scenario&) = default;
};

// ---------------------------------------------------------------------------
// Validation

inline std::vector<std::string> validate(const Scenario& s) {
  std::vector<std::string> out;
  const auto& sv = s.servers;
  const auto& dv = s.devices;
  const auto& p = s.params;
  const int S = sv.num_edge();

  if (sv.edge_locations.size() != sv.edge_clock_speeds.size())
    out.push_back("edge_locations length differs from edge_clock_speeds length");
  if (sv.edge_exec_energy.size() != sv.edge_clock_speeds.size())
    out.push_back("edge_exec_energy length differs from edge_clock_speeds length");
  for (int i = 0; i < S; ++i)
    if (!(sv.edge_clock_speeds[i] > 0))
      out.push_back("edge_clock_speeds[" + std::to_string(i) + "] not positive");
  for (std::size_t i = 0; i < sv.edge_exec_energy.size(); ++i)
    if (!(sv.edge_exec_energy[i] > 0))
      out.push_back("edge_exec_energy[" + std::to_string(i) + "] not positive");
  if (!(sv.cloud_clock_speed > 0)) out.push_back("cloud_clock_speed not positive");
  if (!(sv.cloud_exec_energy > 0)) out.push_back("cloud_exec_energy not positive");
  if (!(sv.edge_tx_energy > 0)) out.push_back("edge_tx_energy not positive");
  if (!(sv.cloud_tx_energy > 0)) out.push_back("cloud_tx_energy not positive");

  const std::size_t n = dv.workloads.size();
  if (dv.locations.size() != n) out.push_back("locations length differs from workloads length");
  if (dv.bandwidths.size() != n) out.push_back("bandwidths length differs from workloads length");
  if (dv.ownership.size() != n) out.push_back("ownership length differs from workloads length");
  if (n == 0) out.push_back("no devices");
  for (std::size_t i = 0; i < n; ++i)
    if (!(dv.workloads[i] > 0)) out.push_back("workloads[" + std::to_string(i) + "] not positive");
  for (std::size_t i = 0; i < dv.bandwidths.size(); ++i)
    if (!(dv.bandwidths[i] > 0))
      out.push_back("bandwidths[" + std::to_string(i) + "] not positive");

  if (s.num_dts <= 0) out.push_back("num_dts not positive");
  // Out-of-range owners plus "empty DT" together cover num_dts == max(ownership)+1.
  std::vector<int> owned(std::max(s.num_dts, 0), 0);
  for (std::size_t i = 0; i < dv.ownership.size(); ++i) {
    const int m = dv.ownership[i];
    if (m < 0 || m >= s.num_dts) {
      out.push_back("ownership[" + std::to_string(i) + "] out of range");
      continue;
    }
    ++owned[m];
  }
  for (int m = 0; m < s.num_dts; ++m)
    if (owned[m] == 0) out.push_back("empty DT " + std::to_string(m));
  if (s.num_servers_total != S + 1) out.push_back("num_servers_total differs from S+1");

  if (!(p.gamma > 0 && p.gamma <= 1)) out.push_back("gamma out of range");
  if (!(p.lambda_ > 0)) out.push_back("lambda_ not positive");
  if (!(p.delta > 0)) out.push_back("delta not positive");
  if (!(p.alpha >= 0 && p.alpha <= 1)) out.push_back("alpha out of range");
  return out;
}

// ---------------------------------------------------------------------------
// Random instances

struct GeneratorConfig {
  int num_devices = 120;
  int num_dts = 15;
  int num_edge_servers = 3;
  double field_width = 1000.0;   // m
  double field_height = 800.0;   // m
  double workload_min = 10.0;
  double workload_max = 40.0;
  // The range is given in megabytes; data units are megabits.
  bool workload_in_megabytes = true;
  double edge_clock_min = 1.8;   // GHz
  double edge_clock_max = 3.0;
  double cloud_clock = 3.5;
  double bandwidth = 1000.0;     // Mbps
  double cloud_exec_energy = 0.1;
  double edge_exec_energy = 0.125;
  double cloud_tx_energy = 0.15;
  double edge_tx_energy = 0.125;
  PhysicalParams params{};
  // 0 places devices uniformly in the field; > 0 is the std-dev (m) of a
  // Gaussian cloud around a per-DT centre.
  double cluster_radius = 0.0;
  std::uint64_t server_seed = 0;
  bool per_scenario_servers = false;
  double min_server_distance = 1.0;  // m
  // Upper bound on devices per DT, enforced by moving surplus devices to DTs
  // with room; 0 disables. Matches the default DDL slot count.
  int max_devices_per_dt = 16;

  // Workload range converted to data units.
  double workload_lo_units() const { return workload_min * (workload_in_megabytes ? 8.0 : 1.0); }
  double workload_hi_units() const { return workload_max * (workload_in_megabytes ? 8.0 : 1.0); }
};

inline void check_config(const GeneratorConfig& c) {
  auto fail = [](const std::string& m) { throw InvalidConfig("generator config: " + m); };
  if (c.num_dts <= 0) fail("num_dts must be positive");
  if (c.num_devices <= 0) fail("num_devices must be positive");
  if (c.num_devices < c.num_dts)
    fail("num_devices (" + std::to_string(c.num_devices) + ") < num_dts (" +
         std::to_string(c.num_dts) + "), cannot give every DT a device");
  if (c.num_edge_servers < 0) fail("num_edge_servers must be non-negative");
  if (!(c.field_width > 0 && c.field_height > 0)) fail("field dimensions must be positive");
  if (!(c.workload_min > 0 && c.workload_min <= c.workload_max)) fail("bad workload range");
  if (!(c.edge_clock_min > 0 && c.edge_clock_min <= c.edge_clock_max)) fail("bad edge clock range");
  if (!(c.cloud_clock > 0 && c.bandwidth > 0)) fail("cloud clock and bandwidth must be positive");
  if (!(c.cloud_exec_energy > 0 && c.edge_exec_energy > 0 && c.cloud_tx_energy > 0 &&
        c.edge_tx_energy > 0))
    fail("energies must be positive");
  if (!(c.params.gamma > 0 && c.params.gamma <= 1)) fail("gamma out of (0,1]");
  if (!(c.params.lambda_ > 0 && c.params.delta > 0)) fail("lambda and delta must be positive");
  if (!(c.params.alpha >= 0 && c.params.alpha <= 1)) fail("alpha out of [0,1]");
  if (c.cluster_radius < 0) fail("cluster_radius must be non-negative");
  if (!(c.min_server_distance >= 0)) fail("min_server_distance must be non-negative");
  if (c.max_devices_per_dt < 0) fail("max_devices_per_dt must be non-negative");
  if (c.max_devices_per_dt > 0 && c.num_devices > static_cast<long long>(c.num_dts) * c.max_devices_per_dt)
    fail("num_devices exceeds num_dts * max_devices_per_dt");
}

inline ServerPool generate_server_pool(std::uint64_t seed, const GeneratorConfig& c) {
  Rng rng(derive_seed(seed, streams::kServerPool));
  std::uniform_real_distribution<double> clock(c.edge_clock_min, c.edge_clock_max);
  std::uniform_real_distribution<double> ux(0.0, c.field_width);
  std::uniform_real_distribution<double> uy(0.0, c.field_height);
  ServerPool pool;
  pool.cloud_clock_speed = c.cloud_clock;
  pool.cloud_exec_energy = c.cloud_exec_energy;
  pool.edge_tx_energy = c.edge_tx_energy;
  pool.cloud_tx_energy = c.cloud_tx_energy;
  for (int s = 0; s < c.num_edge_servers; ++s) {
    pool.edge_clock_speeds.push_back(clock(rng));
    const double x = ux(rng);
    pool.edge_locations.push_back({x, uy(rng)});
    pool.edge_exec_energy.push_back(c.edge_exec_energy);
  }
  return pool;
}

inline Scenario generate_random(std::uint64_t seed, const GeneratorConfig& c) {
  check_config(c);
  Scenario s;
  s.servers = generate_server_pool(c.per_scenario_servers ? seed : c.server_seed, c);
  s.params = c.params;
  s.num_dts = c.num_dts;
  s.num_servers_total = c.num_edge_servers + 1;

  Rng rng(seed);
  const int N = c.num_devices;
  const int M = c.num_dts;
  std::uniform_int_distribution<int> pick_dt(0, M - 1);
  std::uniform_int_distribution<int> pick_dev(0, N - 1);
  std::uniform_real_distribution<double> wl(c.workload_lo_units(), c.workload_hi_units());
  std::uniform_real_distribution<double> ux(0.0, c.field_width);
  std::uniform_real_distribution<double> uy(0.0, c.field_height);

  auto& d = s.devices;
  d.ownership.resize(N);
  for (int n = 0; n < N; ++n) d.ownership[n] = pick_dt(rng);
  std::vector<int> count(M, 0);
  for (int m : d.ownership) ++count[m];
  for (int m = 0; m < M; ++m) {
    if (count[m] > 0) continue;
    int n = pick_dev(rng);
    while (count[d.ownership[n]] < 2) n = pick_dev(rng);  // donor keeps >= 1 device
    --count[d.ownership[n]];
    d.ownership[n] = m;
    ++count[m];
  }
  if (const int cap = c.max_devices_per_dt; cap > 0) {
    for (int m = 0; m < M; ++m) {
      while (count[m] > cap) {
        int n = pick_dev(rng);
        while (d.ownership[n] != m) n = pick_dev(rng);
        int to = pick_dt(rng);
        while (count[to] >= cap) to = pick_dt(rng);
        --count[m];
        d.ownership[n] = to;
        ++count[to];
      }
    }
  }

  std::vector<Point> centres;
  if (c.cluster_radius > 0)
    for (int m = 0; m < M; ++m) {
      const double x = ux(rng);
      centres.push_back({x, uy(rng)});
    }
  std::normal_distribution<double> jitter(0.0, c.cluster_radius > 0 ? c.cluster_radius : 1.0);

  auto too_close = [&](const Point& p) {
    for (const auto& e : s.servers.edge_locations)
      if (distance(p, e) < c.min_server_distance) return true;
    return false;
  };

  d.workloads.resize(N);
  d.locations.resize(N);
  d.bandwidths.assign(N, c.bandwidth);
  for (int n = 0; n < N; ++n) {
    d.workloads[n] = wl(rng);
    Point p;
    do {
      if (c.cluster_radius > 0) {
        const Point& ctr = centres[d.ownership[n]];
        const double x = std::clamp(ctr.x + jitter(rng), 0.0, c.field_width);
        p = {x, std::clamp(ctr.y + jitter(rng), 0.0, c.field_height)};
      } else {
        const double x = ux(rng);
        p = {x, uy(rng)};
      }
    } while (too_close(p));
    d.locations[n] = p;
  }
  return s;
}

// ---------------------------------------------------------------------------
// Document

inline nlohmann::json to_json(const Scenario& s) {
  using nlohmann::json;
  auto pts = [](const std::vector<Point>& v) {
    json a = json::array();
    for (const auto& p : v) a.push_back({p.x, p.y});
    return a;
  };
  json j;
  j["servers"] = {{"edge_clock_speeds", s.servers.edge_clock_speeds},
                  {"cloud_clock_speed", s.servers.cloud_clock_speed},
                  {"edge_locations", pts(s.servers.edge_locations)},
                  {"edge_exec_energy", s.servers.edge_exec_energy},
                  {"cloud_exec_energy", s.servers.cloud_exec_energy},
                  {"edge_tx_energy", s.servers.edge_tx_energy},
                  {"cloud_tx_energy", s.servers.cloud_tx_energy}};
  j["devices"] = {{"workloads", s.devices.workloads},
                  {"locations", pts(s.devices.locations)},
                  {"bandwidths", s.devices.bandwidths},
                  {"ownership", s.devices.ownership}};
  j["params"] = {{"gamma", s.params.gamma},
                 {"lambda_", s.params.lambda_},
                 {"delta", s.params.delta},
                 {"alpha", s.params.alpha}};
  j["num_dts"] = s.num_dts;
  j["num_servers_total"] = s.num_servers_total;
  return j;
}

namespace detail {

template <typename T>
T field(const nlohmann::json& j, const char* key, const std::string& path) {
  const std::string here = path + "/" + key;
  if (!j.is_object() || !j.contains(key)) throw ParseError("missing field", here);
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("wrong type: ") + e.what(), here);
  }
}

inline std::vector<Point> points(const nlohmann::json& j, const char* key, const std::string& path) {
  auto raw = field<std::vector<std::vector<double>>>(j, key, path);
  std::vector<Point> out;
  out.reserve(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw[i].size() != 2)
      throw ParseError("point must have 2 coordinates", path + "/" + key + "/" + std::to_string(i));
    out.push_back({raw[i][0], raw[i][1]});
  }
  return out;
}

}  // namespace detail

inline Scenario from_json(const nlohmann::json& j) {
  using detail::field;
  Scenario s;
  const auto sv = field<nlohmann::json>(j, "servers", "");
  s.servers.edge_clock_speeds = field<std::vector<double>>(sv, "edge_clock_speeds", "/servers");
  s.servers.cloud_clock_speed = field<double>(sv, "cloud_clock_speed", "/servers");
  s.servers.edge_locations = detail::points(sv, "edge_locations", "/servers");
  s.servers.edge_exec_energy = field<std::vector<double>>(sv, "edge_exec_energy", "/servers");
  s.servers.cloud_exec_energy = field<double>(sv, "cloud_exec_energy", "/servers");
  s.servers.edge_tx_energy = field<double>(sv, "edge_tx_energy", "/servers");
  s.servers.cloud_tx_energy = field<double>(sv, "cloud_tx_energy", "/servers");
  const auto dv = field<nlohmann::json>(j, "devices", "");
  s.devices.workloads = field<std::vector<double>>(dv, "workloads", "/devices");
  s.devices.locations = detail::points(dv, "locations", "/devices");
  s.devices.bandwidths = field<std::vector<double>>(dv, "bandwidths", "/devices");
  s.devices.ownership = field<std::vector<int>>(dv, "ownership", "/devices");
  const auto pv = field<nlohmann::json>(j, "params", "");
  s.params.gamma = field<double>(pv, "gamma", "/params");
  s.params.lambda_ = field<double>(pv, "lambda_", "/params");
  s.params.delta = field<double>(pv, "delta", "/params");
  s.params.alpha = field<double>(pv, "alpha", "/params");
  s.num_dts = field<int>(j, "num_dts", "");
  s.num_servers_total = field<int>(j, "num_servers_total", "");
  if (auto v = validate(s); !v.empty()) throw ValidationError(std::move(v));
  return s;
}

inline std::string to_document(const Scenario& s) { return to_json(s).dump(2) + "\n"; }

inline Scenario from_document(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text.begin(), text.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(e.what(), "byte " + std::to_string(e.byte));
  }
  return from_json(j);
}

}  // namespace dtoff

#endif  // DTOFFLOAD_SCENARIO_HPP_
