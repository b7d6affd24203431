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
#include <algorithm>
#include <chrono>
#include <numeric>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "dtoffload/ddl.hpp"
#include "dtoffload/exact.hpp"
#include "dtoffload/harness.hpp"

namespace dtoff {
namespace {

GeneratorConfig desk() {
  GeneratorConfig g;
  g.num_devices = 24;
  g.num_dts = 6;
  return g;
}

DdlConfig small_config(const GeneratorConfig& g) {
  DdlConfig c;
  c.num_dnns = 4;
  c.hidden = {32, 16};
  c.db_capacity = 64;
  c.batch_size = 16;
  c.scaling = FeatureScaling::from(g);
  return c;
}

TEST(Codes, BitsPerDt) {
  EXPECT_EQ(bits_per_dt(1), 1);
  EXPECT_EQ(bits_per_dt(2), 1);
  EXPECT_EQ(bits_per_dt(3), 2);
  EXPECT_EQ(bits_per_dt(4), 2);
  EXPECT_EQ(bits_per_dt(5), 3);
  EXPECT_EQ(bits_per_dt(16), 4);
}

TEST(Codes, ThresholdThenPack) {
  const std::vector<double> high(12, 0.9), low(12, 0.1);
  EXPECT_EQ(decide_one(high, 6, 4).assignment, std::vector<int>(6, 3));
  EXPECT_EQ(decide_one(low, 6, 4).assignment, std::vector<int>(6, 0));
  const std::vector<double> mixed = {0.9, 0.2, 0.3, 0.51, 0.5, 0.5};
  EXPECT_EQ(decide_one(mixed, 3, 4).assignment, (std::vector<int>{2, 1, 0}));
}

TEST(Codes, FoldsCodesBeyondServerCount) {
  const std::vector<double> high(4, 0.9);
  EXPECT_EQ(decide_one(high, 2, 3).assignment, (std::vector<int>{0, 0}));
}

TEST(Codes, RejectsWrongWidth) {
  const std::vector<double> v(5, 0.9);
  EXPECT_THROW(decide_one(v, 3, 4), ContractError);
}

TEST(Codes, EncodeInvertsDecode) {
  for (int total : {2, 3, 4, 5, 8}) {
    Decision d;
    for (int j = 0; j < total; ++j) d.assignment.push_back(j);
    const auto bits = encode_decision(d, total);
    EXPECT_EQ(decide_one(bits, total, total), d);
    for (double b : bits) EXPECT_TRUE(b == 0.0 || b == 1.0);
  }
}

TEST(Features, DeviceOrderDoesNotMatter) {
  const GeneratorConfig g = desk();
  const Scenario s = generate_random(3, g);
  Scenario p = s;
  std::vector<int> perm(s.num_devices());
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(1);
  std::shuffle(perm.begin(), perm.end(), rng);
  for (int i = 0; i < s.num_devices(); ++i) {
    p.devices.workloads[i] = s.devices.workloads[perm[i]];
    p.devices.locations[i] = s.devices.locations[perm[i]];
    p.devices.bandwidths[i] = s.devices.bandwidths[perm[i]];
    p.devices.ownership[i] = s.devices.ownership[perm[i]];
  }
  const auto sc = FeatureScaling::from(g);
  EXPECT_EQ(device_tensor(s, 16, sc), device_tensor(p, 16, sc));
  const auto e = DdlEnsemble::create(6, 4, small_config(g), 1);
  EXPECT_EQ(extract_features(s, e.extractor, sc), extract_features(p, e.extractor, sc));
}

TEST(Features, PaddingIsZero) {
  const GeneratorConfig g = desk();
  const Scenario s = generate_random(3, g);
  const Matrix t = device_tensor(s, 16, FeatureScaling::from(g));
  std::vector<int> count(6, 0);
  for (int m : s.devices.ownership) ++count[m];
  for (int m = 0; m < 6; ++m) {
    EXPECT_TRUE((t.col(m).head(count[m] * kDeviceFeatures).array() > 0).all());
    EXPECT_TRUE((t.col(m).tail((16 - count[m]) * kDeviceFeatures).array() == 0).all());
  }
}

TEST(Features, CapacityErrorNamesDt) {
  GeneratorConfig g = desk();
  g.max_devices_per_dt = 0;
  Scenario s = generate_random(3, g);
  for (int n = 0; n < 16; ++n) s.devices.ownership[n] = 2;
  try {
    device_tensor(s, 10, FeatureScaling::from(g));
    FAIL() << "expected CapacityError";
  } catch (const CapacityError& e) {
    EXPECT_EQ(e.dt(), 2);
  }
}

TEST(Features, ZeroExtractorGivesConstantFeatures) {
  const GeneratorConfig g = desk();
  const Scenario s = generate_random(4, g);
  for (auto head : {Activation::kSigmoid, Activation::kIdentity}) {
    DdlConfig c = small_config(g);
    c.extractor_head = head;
    auto e = DdlEnsemble::create(6, 4, c, 1);
    for (auto& l : e.extractor.net.mutable_layers()) {
      l.weights.setZero();
      l.bias.setZero();
    }
    const Vector f = extract_features(s, e.extractor, c.scaling);
    EXPECT_EQ(f.size(), 6 * c.feature_width);
    EXPECT_TRUE((f.array() == (head == Activation::kSigmoid ? 0.5 : 0.0)).all());
  }
}

TEST(Features, SharedWeightsAcrossDts) {
  const GeneratorConfig g = desk();
  Scenario s = generate_random(4, g);
  // Give DT 1 exactly the devices of DT 0 (moved to the end of the list).
  std::vector<int> dt0;
  for (int n = 0; n < s.num_devices(); ++n)
    if (s.devices.ownership[n] == 0) dt0.push_back(n);
  for (int n = 0; n < s.num_devices(); ++n)
    if (s.devices.ownership[n] == 1) s.devices.ownership[n] = 2;
  for (int n : dt0) {
    s.devices.workloads.push_back(s.devices.workloads[n]);
    s.devices.locations.push_back(s.devices.locations[n]);
    s.devices.bandwidths.push_back(s.devices.bandwidths[n]);
    s.devices.ownership.push_back(1);
  }
  const auto e = DdlEnsemble::create(6, 4, small_config(g), 1);
  const Vector f = extract_features(s, e.extractor, FeatureScaling::from(g));
  const int F = e.config.feature_width;
  EXPECT_EQ(f.segment(0, F), f.segment(F, F));
  EXPECT_NE(f.segment(0, F), f.segment(2 * F, F));
}

TEST(Ensemble, NetworksShareShapeNotWeights) {
  const auto e = DdlEnsemble::create(6, 4, DdlConfig{}, 9);
  EXPECT_EQ(e.k(), 12);
  EXPECT_EQ(e.output_width(), 12);
  for (const auto& d : e.dnns) {
    EXPECT_EQ(d.architecture(), e.dnns[0].architecture());
    EXPECT_EQ(d.output_size(), 12);
    EXPECT_EQ(d.input_size(), 6 * 16);
  }
  for (int a = 0; a < e.k(); ++a)
    for (int b = a + 1; b < e.k(); ++b) EXPECT_FALSE(e.dnns[a] == e.dnns[b]);
}

TEST(Ensemble, SmallerKIsPrefix) {
  DdlConfig c;
  const auto big = DdlEnsemble::create(6, 4, c, 9);
  c.num_dnns = 3;
  const auto small = DdlEnsemble::create(6, 4, c, 9);
  EXPECT_EQ(small.extractor.net, big.extractor.net);
  for (int k = 0; k < 3; ++k) EXPECT_EQ(small.dnns[k], big.dnns[k]);
}

TEST(Ensemble, CheckpointRoundTrip) {
  const GeneratorConfig g = desk();
  auto e = DdlEnsemble::create(6, 4, small_config(g), 2);
  ReplayDatabase db(e.config.db_capacity);
  TrainConfig tc;
  tc.iterations = 80;
  tc.scenarios = g;
  train(e, db, tc);
  const auto back = DdlEnsemble::from_json(nlohmann::json::parse(e.to_json().dump()));
  EXPECT_EQ(back, e);
  auto j = e.to_json();
  j["dnns"].erase(0);
  EXPECT_THROW(DdlEnsemble::from_json(j), ParseError);
  j = e.to_json();
  j["format"] = "dtoffload.mlp";
  EXPECT_THROW(DdlEnsemble::from_json(j), ParseError);
}

TEST(Ensemble, RejectsOtherShapes) {
  const auto e = DdlEnsemble::create(6, 4, small_config(desk()), 2);
  EXPECT_THROW(best_of_k(generate_random(1, GeneratorConfig{}), e), ContractError);
}

TEST(Ensemble, ConfigValidation) {
  DdlConfig c;
  c.batch_size = c.db_capacity + 1;
  EXPECT_THROW(check_config(c), ContractError);
  c = {};
  c.num_dnns = 0;
  EXPECT_THROW(check_config(c), ContractError);
  c = {};
  c.learning_rate = 0;
  EXPECT_THROW(check_config(c), ContractError);
  c = {};
  c.extractor_head = Activation::kSigmoid;
  c.hidden = {7, 5, 3};
  EXPECT_EQ(ddl_config_from_json(to_json(c)), c);
}

TEST(BestOfK, SingleNetworkIsReturnedAsIs) {
  const GeneratorConfig g = desk();
  DdlConfig c = small_config(g);
  c.num_dnns = 1;
  const auto e = DdlEnsemble::create(6, 4, c, 3);
  const Scenario s = generate_random(2, g);
  const auto r = best_of_k(s, e);
  const Vector out = e.dnns[0].predict(extract_features(s, e.extractor, c.scaling));
  EXPECT_EQ(r.decision, decide_one(std::span<const double>(out.data(), out.size()), 6, 4));
  EXPECT_EQ(r.chosen, 0);
}

TEST(BestOfK, ChosenIsCheapestCandidate) {
  const GeneratorConfig g = desk();
  const auto e = DdlEnsemble::create(6, 4, DdlConfig{}, 3);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Scenario s = generate_random(seed, g);
    const auto r = best_of_k(s, e);
    ASSERT_EQ(r.candidates.size(), 12u);
    for (std::size_t k = 0; k < 12; ++k) {
      EXPECT_LE(r.cost, r.candidate_costs[k]);
      EXPECT_EQ(r.candidate_costs[k], evaluate(s, r.candidates[k]).weighted_cost);
    }
    EXPECT_EQ(r.decision, r.candidates[r.chosen]);
    // Ties go to the lowest index.
    for (int k = 0; k < r.chosen; ++k) EXPECT_GT(r.candidate_costs[k], r.cost);
  }
}

TEST(BestOfK, FindsOptimumWhenOneNetworkEncodesIt) {
  const GeneratorConfig g = desk();
  const Scenario s = generate_random(7, g);
  const auto opt = solve_exact(s);
  auto e = DdlEnsemble::create(6, 4, DdlConfig{}, 5);
  auto& last = e.dnns[7].mutable_layers().back();
  last.weights.setZero();
  const auto bits = encode_decision(opt.decision, 4);
  for (std::size_t i = 0; i < bits.size(); ++i) last.bias(static_cast<Eigen::Index>(i)) = bits[i] > 0 ? 10.0 : -10.0;
  const auto r = best_of_k(s, e);
  EXPECT_EQ(r.cost, opt.cost.weighted_cost);
  EXPECT_EQ(r.decision, opt.decision);
}

TEST(BestOfK, CostNonIncreasingInK) {
  const GeneratorConfig g = desk();
  const Scenario s = generate_random(8, g);
  double prev = INFINITY;
  for (int k = 1; k <= 16; ++k) {
    DdlConfig c;
    c.num_dnns = k;
    const double q = best_of_k(s, DdlEnsemble::create(6, 4, c, 4)).cost;
    EXPECT_LE(q, prev);
    prev = q;
  }
}

TEST(BestOfK, BatchedDecisionMatchesSingle) {
  const GeneratorConfig g = desk();
  std::vector<Scenario> probe;
  for (std::uint64_t i = 0; i < 16; ++i) probe.push_back(generate_random(i, g));
  const auto e = DdlEnsemble::create(6, 4, DdlConfig{}, 4);
  const EncodedScenarios enc(probe, 16, e.config.scaling);
  const auto batched = enc.decide(e);
  for (std::size_t i = 0; i < probe.size(); ++i) {
    const auto single = best_of_k(probe[i], e);
    EXPECT_EQ(batched[i].decision, single.decision);
    EXPECT_EQ(batched[i].cost, single.cost);
    EXPECT_EQ(batched[i].chosen, single.chosen);
  }
}

TEST(Infer, UntrainedEnsembleGivesValidDecision) {
  const Scenario s = generate_random(1, GeneratorConfig{});
  const auto e = DdlEnsemble::create(15, 4, DdlConfig{}, 1);
  const auto r = infer(s, e);
  EXPECT_TRUE(is_valid_decision(r.decision, s));
  EXPECT_EQ(r.scheme_name, "ddl");
  EXPECT_EQ(r.cost.weighted_cost, evaluate(s, r.decision).weighted_cost);
  EXPECT_EQ(infer(s, e).decision, r.decision);
}

TEST(Infer, FastAtTableScale) {
  const Scenario s = generate_random(1, GeneratorConfig{});
  const auto e = DdlEnsemble::create(15, 4, DdlConfig{}, 1);
  std::vector<double> t;
  for (int i = 0; i < 21; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    infer(s, e);
    t.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }
  std::nth_element(t.begin(), t.begin() + 10, t.end());
  EXPECT_LT(t[10], 0.01);
}

TEST(ReplayDatabase, FifoOverwritesOldest) {
  ReplayDatabase db(5);
  EXPECT_FALSE(db.full());
  for (int i = 0; i < 8; ++i) db.push({{static_cast<double>(i)}, {}, static_cast<double>(i)});
  EXPECT_TRUE(db.full());
  EXPECT_EQ(db.size(), 5);
  EXPECT_EQ(db.inserted(), 8u);
  for (int i = 0; i < 5; ++i) EXPECT_EQ(db[i].cost, i + 3.0);
  EXPECT_THROW(db[5], ContractError);
}

TEST(ReplayDatabase, NeverExceedsCapacity) {
  ReplayDatabase db(7);
  for (int i = 0; i < 100; ++i) {
    db.push({{}, {}, static_cast<double>(i)});
    EXPECT_LE(db.size(), 7);
    EXPECT_EQ(db[0].cost, std::max(0, i - 6));
  }
}

TEST(ReplayDatabase, SampleIndicesAreDistinct) {
  ReplayDatabase db(32);
  for (int i = 0; i < 32; ++i) db.push({{}, {}, 0.0});
  Rng rng(1);
  auto idx = db.sample_indices(20, rng);
  std::sort(idx.begin(), idx.end());
  EXPECT_EQ(std::adjacent_find(idx.begin(), idx.end()), idx.end());
  EXPECT_GE(idx.front(), 0);
  EXPECT_LT(idx.back(), 32);
  EXPECT_THROW(db.sample_indices(33, rng), ContractError);
  EXPECT_THROW(ReplayDatabase(0), ContractError);
}

TEST(Train, NoStepBeforeDatabaseFills) {
  const GeneratorConfig g = desk();
  const DdlConfig c = small_config(g);
  auto e = DdlEnsemble::create(6, 4, c, 1);
  const auto initial = e;
  ReplayDatabase db(c.db_capacity);
  TrainConfig tc;
  tc.iterations = 40;
  tc.scenarios = g;
  const auto trace = train(e, db, tc);
  EXPECT_EQ(trace.size(), 40u);
  EXPECT_EQ(db.size(), 40);
  for (const auto& r : trace) {
    EXPECT_FALSE(r.trained);
    EXPECT_TRUE(r.losses.empty());
  }
  EXPECT_EQ(e, initial);
}

TEST(Train, StepsStartOnceDatabaseIsFull) {
  const GeneratorConfig g = desk();
  const DdlConfig c = small_config(g);
  auto e = DdlEnsemble::create(6, 4, c, 1);
  ReplayDatabase db(c.db_capacity);
  TrainConfig tc;
  tc.iterations = 70;
  tc.scenarios = g;
  const auto trace = train(e, db, tc);
  for (const auto& r : trace) {
    EXPECT_EQ(r.trained, r.iteration > 64);
    if (r.trained) {
      EXPECT_EQ(r.losses.size(), 4u);
    }
  }
  EXPECT_EQ(e.dnns[0].adam_state().step, 6);
  EXPECT_EQ(e.extractor.net.adam_state().step, 6);
}

TEST(Train, Deterministic) {
  const GeneratorConfig g = desk();
  const DdlConfig c = small_config(g);
  TrainConfig tc;
  tc.iterations = 100;
  tc.scenarios = g;
  tc.seed = 5;
  auto run = [&](int threads) {
    auto e = DdlEnsemble::create(6, 4, c, 1);
    ReplayDatabase db(c.db_capacity);
    tc.threads = threads;
    auto trace = train(e, db, tc);
    return std::make_pair(e, trace);
  };
  const auto a = run(1);
  const auto b = run(1);
  const auto p = run(3);
  EXPECT_EQ(a.first, b.first);
  EXPECT_EQ(a.first, p.first);
  ASSERT_EQ(a.second.size(), p.second.size());
  for (std::size_t i = 0; i < a.second.size(); ++i) {
    EXPECT_EQ(a.second[i].chosen_cost, p.second[i].chosen_cost);
    EXPECT_EQ(a.second[i].losses, p.second[i].losses);
  }
}

TEST(Train, RejectsBadConfig) {
  const GeneratorConfig g = desk();
  auto e = DdlEnsemble::create(6, 4, small_config(g), 1);
  ReplayDatabase db(8);
  TrainConfig tc;
  tc.scenarios = g;
  EXPECT_THROW(train(e, db, tc), ContractError);
  ReplayDatabase ok(64);
  tc.iterations = -1;
  EXPECT_THROW(train(e, ok, tc), ContractError);
}

// Full-scale smoke run. The replay database is shrunk to 256 so that most of
// the 1000 iterations train.
TEST(Train, ProbeCostFallsAtTableScale) {
  GeneratorConfig g;
  DdlConfig c;
  c.db_capacity = 256;
  c.scaling = FeatureScaling::from(g);
  const ProbeSet probe = ProbeSet::create(128, g, 3);
  const auto rep = run_training({"smoke", c, 1000, 3}, probe, {20, 1});
  const auto means = rep.evaluated(rep.probe_mean);
  ASSERT_EQ(means.size(), 50u);
  const double first = rep.initial_probe_mean;
  const double last = std::accumulate(means.end() - 5, means.end(), 0.0) / 5.0;
  EXPECT_LT(last, first);
}

}  // namespace
}  // namespace dtoff
