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

// Reference decision schemes: exhaustive search over all (S+1)^M placements
// and the random / cloud-only / average-distribution baselines.

#ifndef DTOFFLOAD_EXACT_HPP_
#define DTOFFLOAD_EXACT_HPP_

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "dtoffload/cost_model.hpp"
#include "dtoffload/errors.hpp"
#include "dtoffload/parallel.hpp"
#include "dtoffload/random.hpp"
#include "dtoffload/scenario.hpp"

namespace dtoff {

struct SchemeResult {
  Decision decision;
  CostBreakdown cost;
  std::string scheme_name;
  double elapsed = 0.0;  // s
};

inline constexpr std::uint64_t kDefaultEnumerationCap = std::uint64_t{1} << 24;

namespace detail {

using Clock = std::chrono::steady_clock;

inline double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

inline SchemeResult finish(const Scenario& s, Decision d, std::string name, Clock::time_point t0) {
  SchemeResult r;
  r.cost = evaluate(s, d);
  r.decision = std::move(d);
  r.scheme_name = std::move(name);
  r.elapsed = seconds_since(t0);
  return r;
}

// base^exp, or nullopt-like overflow flag.
inline std::uint64_t checked_pow(std::uint64_t base, int exp, bool& overflow) {
  overflow = false;
  std::uint64_t r = 1;
  for (int i = 0; i < exp; ++i) {
    if (base != 0 && r > std::numeric_limits<std::uint64_t>::max() / base) {
      overflow = true;
      return std::numeric_limits<std::uint64_t>::max();
    }
    r *= base;
  }
  return r;
}

// Decodes a lexicographic rank into a mixed-radix assignment (DT 0 is the
// most significant digit, so rank order == lexicographic order).
inline void rank_to_assignment(std::uint64_t rank, int radix, std::span<int> out) {
  for (int m = static_cast<int>(out.size()) - 1; m >= 0; --m) {
    out[m] = static_cast<int>(rank % radix);
    rank /= radix;
  }
}

}  // namespace detail

inline std::uint64_t decision_space_size(const Scenario& s, bool* overflow = nullptr) {
  bool of = false;
  const auto n = detail::checked_pow(s.num_servers_total, s.num_dts, of);
  if (overflow) *overflow = of;
  return n;
}

inline bool exact_feasible(const Scenario& s, std::uint64_t cap = kDefaultEnumerationCap) {
  bool of = false;
  const auto n = decision_space_size(s, &of);
  return !of && n <= cap;
}

// Minimises the weighted cost over every assignment; ties go to the
// lexicographically smallest assignment. The rank range is split into
// contiguous chunks and reduced on (cost, rank), so the answer does not
// depend on `threads`.
inline SchemeResult solve_exact(const Scenario& s, std::uint64_t cap = kDefaultEnumerationCap,
                                int threads = 1) {
  const auto t0 = detail::Clock::now();
  bool overflow = false;
  const std::uint64_t total = decision_space_size(s, &overflow);
  if (overflow || total > cap) throw InfeasibleEnumeration(total, cap, overflow);

  const CostTable table(s);
  const int M = s.num_dts;
  const int radix = s.num_servers_total;
  struct Best {
    double cost = std::numeric_limits<double>::infinity();
    std::uint64_t rank = std::numeric_limits<std::uint64_t>::max();
  };
  const int chunks = static_cast<int>(std::clamp<std::uint64_t>(threads, 1, total));
  std::vector<Best> best(chunks);
  parallel_for(chunks, threads, [&](int c) {
    const std::uint64_t lo = total / chunks * c + std::min<std::uint64_t>(c, total % chunks);
    const std::uint64_t hi = lo + total / chunks + (static_cast<std::uint64_t>(c) < total % chunks);
    std::vector<int> a(M);
    std::vector<double> scratch(2 * static_cast<std::size_t>(M));
    detail::rank_to_assignment(lo, radix, a);
    Best local;
    for (std::uint64_t r = lo; r < hi; ++r) {
      const double q = table.weighted_cost(a, scratch);
      if (q < local.cost) local = {q, r};
      // odometer increment, last DT fastest
      for (int m = M - 1; m >= 0; --m) {
        if (++a[m] < radix) break;
        a[m] = 0;
      }
    }
    best[c] = local;
  });
  Best winner;
  for (const auto& b : best)
    if (b.cost < winner.cost || (b.cost == winner.cost && b.rank < winner.rank)) winner = b;

  Decision d;
  d.assignment.resize(M);
  detail::rank_to_assignment(winner.rank, radix, d.assignment);
  return detail::finish(s, std::move(d), "exact", t0);
}

inline SchemeResult scheme_random(const Scenario& s, std::uint64_t seed) {
  const auto t0 = detail::Clock::now();
  Rng rng(seed);
  std::uniform_int_distribution<int> pick(0, s.num_servers_total - 1);
  Decision d;
  d.assignment.resize(s.num_dts);
  for (auto& a : d.assignment) a = pick(rng);
  return detail::finish(s, std::move(d), "ro", t0);
}

inline SchemeResult scheme_cloud_only(const Scenario& s) {
  const auto t0 = detail::Clock::now();
  Decision d{std::vector<int>(s.num_dts, s.cloud_index())};
  return detail::finish(s, std::move(d), "co", t0);
}

inline std::vector<double> dt_workloads(const Scenario& s) {
  std::vector<double> total(s.num_dts, 0.0);
  for (int n = 0; n < s.num_devices(); ++n)
    total.at(s.devices.ownership[n]) += s.devices.workloads[n];
  return total;
}

// Longest-processing-time greedy: heaviest DT first, each to the server with
// the least workload so far (lowest index on ties). Cloud counts as a server.
inline SchemeResult scheme_average_distribution(const Scenario& s) {
  const auto t0 = detail::Clock::now();
  const auto load = dt_workloads(s);
  std::vector<int> order(s.num_dts);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return load[a] > load[b]; });
  std::vector<double> acc(s.num_servers_total, 0.0);
  Decision d;
  d.assignment.assign(s.num_dts, 0);
  for (int m : order) {
    const auto it = std::min_element(acc.begin(), acc.end());
    const int server = static_cast<int>(it - acc.begin());
    d.assignment[m] = server;
    acc[server] += load[m];
  }
  return detail::finish(s, std::move(d), "ad", t0);
}

}  // namespace dtoff

#endif  // DTOFFLOAD_EXACT_HPP_
