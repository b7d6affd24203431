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

// Distributed deep learning (DDL) offloading: a shared per-DT feature
// extractor feeds K decision networks of identical shape; the cheapest of
// their K decoded decisions labels the replay database the networks are then
// trained on.

#ifndef DTOFFLOAD_DDL_HPP_
#define DTOFFLOAD_DDL_HPP_

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "dtoffload/cost_model.hpp"
#include "dtoffload/errors.hpp"
#include "dtoffload/exact.hpp"
#include "dtoffload/neural.hpp"
#include "dtoffload/parallel.hpp"
#include "dtoffload/random.hpp"
#include "dtoffload/scenario.hpp"

namespace dtoff {

using Matrix = MlpModel::Matrix;
using Vector = MlpModel::Vector;

// Per-device input features: workload, x, y, bandwidth, each divided by its scale.
inline constexpr int kDeviceFeatures = 4;

struct FeatureScaling {
  double workload = 320.0;   // data units; 40 MB in Mb
  double width = 1000.0;     // m
  double height = 800.0;     // m
  double bandwidth = 1000.0; // Mbps

  static FeatureScaling from(const GeneratorConfig& g) {
    return {g.workload_hi_units(), g.field_width, g.field_height, g.bandwidth};
  }
  friend bool operator==(const FeatureScaling&, const FeatureScaling&) = default;
};

struct DdlConfig {
  int num_dnns = 12;
  std::vector<int> hidden = {128, 64};
  int slots_per_dt = 16;
  int extractor_hidden = 32;
  int feature_width = 16;
  Activation extractor_head = Activation::kIdentity;
  double learning_rate = 1e-3;
  int db_capacity = 1024;
  int batch_size = 128;
  int train_interval = 1;
  FeatureScaling scaling{};

  friend bool operator==(const DdlConfig&, const DdlConfig&) = default;
};

inline void check_config(const DdlConfig& c) {
  auto fail = [](const std::string& m) { throw ContractError("ddl config: " + m); };
  if (c.num_dnns <= 0) fail("num_dnns must be positive");
  if (c.hidden.empty()) fail("decision networks need hidden layers");
  for (int h : c.hidden)
    if (h <= 0) fail("hidden widths must be positive");
  if (c.slots_per_dt <= 0 || c.extractor_hidden <= 0 || c.feature_width <= 0)
    fail("extractor sizes must be positive");
  if (!(c.learning_rate > 0)) fail("learning_rate must be positive");
  if (c.db_capacity <= 0) fail("db_capacity must be positive");
  if (c.batch_size <= 0 || c.batch_size > c.db_capacity) fail("batch_size must lie in [1, db_capacity]");
  if (c.train_interval <= 0) fail("train_interval must be positive");
  if (!(c.scaling.workload > 0 && c.scaling.width > 0 && c.scaling.height > 0 && c.scaling.bandwidth > 0))
    fail("feature scales must be positive");
}

inline nlohmann::json to_json(const DdlConfig& c) {
  return {{"num_dnns", c.num_dnns},
          {"hidden", c.hidden},
          {"slots_per_dt", c.slots_per_dt},
          {"extractor_hidden", c.extractor_hidden},
          {"feature_width", c.feature_width},
          {"extractor_head", to_string(c.extractor_head)},
          {"learning_rate", c.learning_rate},
          {"db_capacity", c.db_capacity},
          {"batch_size", c.batch_size},
          {"train_interval", c.train_interval},
          {"scaling",
           {{"workload", c.scaling.workload},
            {"width", c.scaling.width},
            {"height", c.scaling.height},
            {"bandwidth", c.scaling.bandwidth}}}};
}

inline DdlConfig ddl_config_from_json(const nlohmann::json& j) {
  DdlConfig c;
  c.num_dnns = j.at("num_dnns").get<int>();
  c.hidden = j.at("hidden").get<std::vector<int>>();
  c.slots_per_dt = j.at("slots_per_dt").get<int>();
  c.extractor_hidden = j.at("extractor_hidden").get<int>();
  c.feature_width = j.at("feature_width").get<int>();
  c.extractor_head = activation_from_string(j.at("extractor_head").get<std::string>());
  c.learning_rate = j.at("learning_rate").get<double>();
  c.db_capacity = j.at("db_capacity").get<int>();
  c.batch_size = j.at("batch_size").get<int>();
  c.train_interval = j.at("train_interval").get<int>();
  const auto& s = j.at("scaling");
  c.scaling = {s.at("workload").get<double>(), s.at("width").get<double>(), s.at("height").get<double>(),
               s.at("bandwidth").get<double>()};
  return c;
}

// ---------------------------------------------------------------------------
// Binary decision codes

inline int bits_per_dt(int num_servers_total) {
  int bits = 1;
  while ((1 << bits) < num_servers_total) ++bits;
  return bits;
}

// Thresholds each output at 1/2 (above -> 1), packs each DT's bits MSB
// first and folds the code modulo S+1.
inline Decision decide_one(std::span<const double> outputs, int num_dts, int num_servers_total) {
  const int bits = bits_per_dt(num_servers_total);
  if (static_cast<int>(outputs.size()) != num_dts * bits)
    throw ContractError("decision output has " + std::to_string(outputs.size()) + " values, expected " +
                        std::to_string(num_dts * bits));
  Decision d;
  d.assignment.resize(num_dts);
  for (int m = 0; m < num_dts; ++m) {
    int code = 0;
    for (int j = 0; j < bits; ++j) code = (code << 1) | (outputs[m * bits + j] > 0.5 ? 1 : 0);
    d.assignment[m] = code % num_servers_total;
  }
  return d;
}

// Inverse of decide_one for training labels; server indices are already the
// smallest preimage of their folded code.
inline std::vector<double> encode_decision(const Decision& d, int num_servers_total) {
  const int bits = bits_per_dt(num_servers_total);
  std::vector<double> out(d.assignment.size() * bits);
  for (std::size_t m = 0; m < d.assignment.size(); ++m)
    for (int j = 0; j < bits; ++j) out[m * bits + j] = (d.assignment[m] >> (bits - 1 - j)) & 1;
  return out;
}

// ---------------------------------------------------------------------------
// Feature extraction

// Padded, canonical device tensor: one column per DT, `slots` device rows of
// kDeviceFeatures each. Devices of a DT are sorted by (workload, x, y).
inline Matrix device_tensor(const Scenario& s, int slots, const FeatureScaling& sc) {
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(slots) * kDeviceFeatures, s.num_dts);
  std::vector<std::vector<int>> members(s.num_dts);
  for (int n = 0; n < s.num_devices(); ++n) members.at(s.devices.ownership[n]).push_back(n);
  const auto& dv = s.devices;
  for (int m = 0; m < s.num_dts; ++m) {
    auto& mem = members[m];
    if (static_cast<int>(mem.size()) > slots) throw CapacityError(m, static_cast<int>(mem.size()), slots);
    std::sort(mem.begin(), mem.end(), [&](int a, int b) {
      return std::tie(dv.workloads[a], dv.locations[a].x, dv.locations[a].y) <
             std::tie(dv.workloads[b], dv.locations[b].x, dv.locations[b].y);
    });
    for (std::size_t i = 0; i < mem.size(); ++i) {
      const int n = mem[i];
      const auto r = static_cast<Eigen::Index>(i) * kDeviceFeatures;
      out(r + 0, m) = dv.workloads[n] / sc.workload;
      out(r + 1, m) = dv.locations[n].x / sc.width;
      out(r + 2, m) = dv.locations[n].y / sc.height;
      out(r + 3, m) = dv.bandwidths[n] / sc.bandwidth;
    }
  }
  return out;
}

struct FeatureExtractor {
  MlpModel net;  // one hidden layer, shared across every DT
  int slots = 16;

  int per_dt_input_width() const { return slots * kDeviceFeatures; }
  int feature_width() const { return net.output_size(); }
};

// Extractor applied to each DT column; blocks concatenated in DT order.
// Columns of `tensors` are grouped per scenario (num_dts consecutive
// columns), so the result reshapes to (num_dts * F) x scenarios.
inline Matrix features_from_tensors(const FeatureExtractor& fe, const Matrix& tensors, int num_dts) {
  Matrix f = fe.net.predict(tensors);
  return f.reshaped(static_cast<Eigen::Index>(num_dts) * f.rows(), f.cols() / num_dts);
}

inline Vector extract_features(const Scenario& s, const FeatureExtractor& fe, const FeatureScaling& sc) {
  return features_from_tensors(fe, device_tensor(s, fe.slots, sc), s.num_dts).col(0);
}

// ---------------------------------------------------------------------------
// Ensemble

struct DdlEnsemble {
  DdlConfig config;
  int num_dts = 0;
  int num_servers_total = 0;
  FeatureExtractor extractor;
  std::vector<MlpModel> dnns;

  int k() const { return static_cast<int>(dnns.size()); }
  int bits() const { return bits_per_dt(num_servers_total); }
  int output_width() const { return num_dts * bits(); }

  static Architecture extractor_architecture(const DdlConfig& c) {
    return {c.slots_per_dt * kDeviceFeatures,
            {{c.extractor_hidden, Activation::kRelu}, {c.feature_width, c.extractor_head}}};
  }

  static Architecture dnn_architecture(const DdlConfig& c, int num_dts, int num_servers_total) {
    Architecture a{num_dts * c.feature_width, {}};
    for (int h : c.hidden) a.layers.push_back({h, Activation::kRelu});
    a.layers.push_back({num_dts * bits_per_dt(num_servers_total), Activation::kSigmoid});
    return a;
  }

  // DNN k draws its weights from stream (seed, k): ensembles that differ only
  // in K share their first networks.
  static DdlEnsemble create(int num_dts, int num_servers_total, const DdlConfig& c, std::uint64_t seed) {
    check_config(c);
    if (num_dts <= 0 || num_servers_total <= 0) throw ContractError("ensemble needs DTs and servers");
    DdlEnsemble e;
    e.config = c;
    e.num_dts = num_dts;
    e.num_servers_total = num_servers_total;
    const AdamConfig adam{c.learning_rate};
    e.extractor.slots = c.slots_per_dt;
    e.extractor.net =
        MlpModel::init_random(extractor_architecture(c), derive_seed(seed, streams::kExtractorInit), adam);
    const auto arch = dnn_architecture(c, num_dts, num_servers_total);
    for (int k = 0; k < c.num_dnns; ++k)
      e.dnns.push_back(MlpModel::init_random(arch, derive_seed(seed, streams::kDnnInit, k), adam));
    return e;
  }

  void check_compatible(const Scenario& s) const {
    if (s.num_dts != num_dts || s.num_servers_total != num_servers_total)
      throw ContractError("scenario shape (M=" + std::to_string(s.num_dts) + ", S+1=" +
                          std::to_string(s.num_servers_total) + ") differs from ensemble (M=" +
                          std::to_string(num_dts) + ", S+1=" + std::to_string(num_servers_total) + ")");
  }

  friend bool operator==(const DdlEnsemble& a, const DdlEnsemble& b) {
    return a.config == b.config && a.num_dts == b.num_dts && a.num_servers_total == b.num_servers_total &&
           a.extractor.slots == b.extractor.slots && a.extractor.net == b.extractor.net && a.dnns == b.dnns;
  }

  static constexpr int kFormatVersion = 1;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["format"] = "dtoffload.ensemble";
    j["version"] = kFormatVersion;
    j["num_dts"] = num_dts;
    j["num_servers_total"] = num_servers_total;
    j["config"] = dtoff::to_json(config);
    j["extractor"] = extractor.net.to_json();
    j["dnns"] = nlohmann::json::array();
    for (const auto& d : dnns) j["dnns"].push_back(d.to_json());
    return j;
  }

  static DdlEnsemble from_json(const nlohmann::json& j) {
    try {
      if (j.at("format").get<std::string>() != "dtoffload.ensemble")
        throw ParseError("not an ensemble checkpoint", "/format");
      if (j.at("version").get<int>() != kFormatVersion) throw ParseError("unsupported version", "/version");
      DdlEnsemble e;
      e.config = ddl_config_from_json(j.at("config"));
      e.num_dts = j.at("num_dts").get<int>();
      e.num_servers_total = j.at("num_servers_total").get<int>();
      e.extractor.slots = e.config.slots_per_dt;
      e.extractor.net = MlpModel::from_json(j.at("extractor"));
      for (const auto& d : j.at("dnns")) e.dnns.push_back(MlpModel::from_json(d));
      if (e.extractor.net.architecture() != extractor_architecture(e.config))
        throw ParseError("extractor shape differs from config", "/extractor");
      const auto arch = dnn_architecture(e.config, e.num_dts, e.num_servers_total);
      for (const auto& d : e.dnns)
        if (d.architecture() != arch) throw ParseError("decision network shape differs from config", "/dnns");
      if (e.k() != e.config.num_dnns) throw ParseError("network count differs from config", "/dnns");
      return e;
    } catch (const nlohmann::json::exception& ex) {
      throw ParseError(std::string("malformed ensemble checkpoint: ") + ex.what(), "ensemble");
    }
  }
};

// ---------------------------------------------------------------------------
// Best-of-K

struct BestOfK {
  Decision decision;
  double cost = std::numeric_limits<double>::infinity();
  int chosen = -1;
  std::vector<Decision> candidates;
  std::vector<double> candidate_costs;
};

namespace detail {

// Picks the cheapest candidate for scenario column `col`; ties go to the
// lowest network index.
inline BestOfK pick_best(const std::vector<Matrix>& outputs, Eigen::Index col, const CostTable& table,
                         int num_dts, int num_servers_total, bool keep_candidates) {
  BestOfK r;
  std::vector<double> scratch(2 * static_cast<std::size_t>(num_dts));
  for (std::size_t k = 0; k < outputs.size(); ++k) {
    const auto& o = outputs[k];
    Decision d = decide_one(std::span<const double>(o.col(col).data(), o.rows()), num_dts, num_servers_total);
    const double q = table.weighted_cost(d.assignment, scratch);
    if (q < r.cost) {
      r.cost = q;
      r.chosen = static_cast<int>(k);
      r.decision = d;
    }
    if (keep_candidates) {
      r.candidates.push_back(std::move(d));
      r.candidate_costs.push_back(q);
    }
  }
  return r;
}

}  // namespace detail

inline BestOfK best_of_k(const Scenario& s, const DdlEnsemble& e) {
  e.check_compatible(s);
  const Matrix features =
      features_from_tensors(e.extractor, device_tensor(s, e.extractor.slots, e.config.scaling), s.num_dts);
  std::vector<Matrix> outputs;
  outputs.reserve(e.dnns.size());
  for (const auto& dnn : e.dnns) outputs.push_back(dnn.predict(features));
  return detail::pick_best(outputs, 0, CostTable(s), s.num_dts, s.num_servers_total, true);
}

// A fixed set of scenarios pre-encoded for repeated batched inference.
class EncodedScenarios {
 public:
  EncodedScenarios(std::span<const Scenario> scenarios, int slots, const FeatureScaling& sc) {
    if (scenarios.empty()) return;
    num_dts_ = scenarios.front().num_dts;
    num_servers_total_ = scenarios.front().num_servers_total;
    tensors_.resize(static_cast<Eigen::Index>(slots) * kDeviceFeatures,
                    static_cast<Eigen::Index>(scenarios.size()) * num_dts_);
    for (std::size_t i = 0; i < scenarios.size(); ++i) {
      const auto& s = scenarios[i];
      if (s.num_dts != num_dts_ || s.num_servers_total != num_servers_total_)
        throw ContractError("scenario set mixes shapes");
      tensors_.middleCols(static_cast<Eigen::Index>(i) * num_dts_, num_dts_) = device_tensor(s, slots, sc);
      tables_.emplace_back(s);
    }
  }

  std::size_t size() const { return tables_.size(); }
  const Matrix& tensors() const { return tensors_; }
  const CostTable& table(std::size_t i) const { return tables_[i]; }

  // Best-of-K decision and weighted cost for every scenario.
  std::vector<BestOfK> decide(const DdlEnsemble& e) const {
    if (size() == 0) return {};
    if (e.num_dts != num_dts_ || e.num_servers_total != num_servers_total_)
      throw ContractError("scenario set shape differs from ensemble");
    const Matrix features = features_from_tensors(e.extractor, tensors_, num_dts_);
    std::vector<Matrix> outputs;
    for (const auto& dnn : e.dnns) outputs.push_back(dnn.predict(features));
    std::vector<BestOfK> out;
    out.reserve(size());
    for (std::size_t i = 0; i < size(); ++i)
      out.push_back(detail::pick_best(outputs, static_cast<Eigen::Index>(i), tables_[i], num_dts_,
                                      num_servers_total_, false));
    return out;
  }

 private:
  int num_dts_ = 0;
  int num_servers_total_ = 0;
  Matrix tensors_;
  std::vector<CostTable> tables_;
};

inline SchemeResult infer(const Scenario& s, const DdlEnsemble& e) {
  const auto t0 = std::chrono::steady_clock::now();
  auto best = best_of_k(s, e);
  SchemeResult r;
  r.cost = evaluate(s, best.decision);
  r.decision = std::move(best.decision);
  r.scheme_name = "ddl";
  r.elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

// ---------------------------------------------------------------------------
// Replay database

struct ReplaySample {
  std::vector<double> inputs;  // device tensor, column-major (slots*features) x M
  std::vector<double> label;   // encoded best decision, M * bits
  double cost = 0.0;           // weighted cost of that decision
};

// Fixed-capacity FIFO; once full every insert overwrites the oldest sample.
class ReplayDatabase {
 public:
  explicit ReplayDatabase(int capacity) : capacity_(capacity) {
    if (capacity <= 0) throw ContractError("replay database capacity must be positive");
    ring_.reserve(capacity);
  }

  int capacity() const { return capacity_; }
  int size() const { return static_cast<int>(ring_.size()); }
  bool full() const { return size() == capacity_; }
  std::uint64_t inserted() const { return inserted_; }

  void push(ReplaySample s) {
    if (!full()) {
      ring_.push_back(std::move(s));
    } else {
      ring_[cursor_] = std::move(s);
    }
    cursor_ = (cursor_ + 1) % capacity_;
    ++inserted_;
  }

  // i = 0 is the oldest stored sample.
  const ReplaySample& operator[](int i) const {
    if (i < 0 || i >= size()) throw ContractError("replay index out of range");
    return full() ? ring_[(cursor_ + i) % capacity_] : ring_[i];
  }

  // `count` distinct storage slots drawn uniformly.
  std::vector<int> sample_indices(int count, Rng& rng) const {
    if (count > size()) throw ContractError("batch larger than database");
    std::vector<int> idx(size());
    std::iota(idx.begin(), idx.end(), 0);
    for (int i = 0; i < count; ++i) {
      std::uniform_int_distribution<int> pick(i, size() - 1);
      std::swap(idx[i], idx[pick(rng)]);
    }
    idx.resize(count);
    return idx;
  }

  const ReplaySample& slot(int storage_index) const { return ring_.at(storage_index); }

 private:
  int capacity_;
  int cursor_ = 0;
  std::uint64_t inserted_ = 0;
  std::vector<ReplaySample> ring_;
};

// ---------------------------------------------------------------------------
// Training

struct TrainConfig {
  int iterations = 1000;
  GeneratorConfig scenarios{};
  std::uint64_t seed = 1;
  int threads = 1;
};

struct IterationRecord {
  int iteration = 0;  // 1-based
  double chosen_cost = 0.0;
  int chosen_dnn = -1;
  bool trained = false;
  std::vector<double> losses;  // per network, empty when no training step ran
};

using TrainingTrace = std::vector<IterationRecord>;
using IterationObserver = std::function<void(const IterationRecord&, const DdlEnsemble&)>;

namespace detail {

struct StepOutput {
  MlpModel::Gradients dnn;
  MlpModel::Gradients extractor;
  double loss = 0.0;
};

// Forward + backward of network k on one batch through the shared extractor.
inline StepOutput train_batch(const DdlEnsemble& e, int k, const ReplayDatabase& db,
                              const std::vector<int>& batch) {
  const int M = e.num_dts;
  const auto in_rows = static_cast<Eigen::Index>(e.extractor.per_dt_input_width());
  const auto B = static_cast<Eigen::Index>(batch.size());
  Matrix x(in_rows, B * M);
  Matrix y(e.output_width(), B);
  for (Eigen::Index i = 0; i < B; ++i) {
    const auto& s = db.slot(batch[i]);
    std::copy(s.inputs.begin(), s.inputs.end(), x.data() + i * in_rows * M);
    std::copy(s.label.begin(), s.label.end(), y.col(i).data());
  }
  const auto ext_cache = e.extractor.net.forward(x);
  const auto& f = ext_cache.output();
  const Matrix features = f.reshaped(f.rows() * M, B);
  const auto& dnn = e.dnns[k];
  const auto cache = dnn.forward(features);
  StepOutput out;
  out.loss = MlpModel::cross_entropy(cache.output(), y);
  out.dnn = dnn.backward(cache, y);
  const Matrix grad_f = out.dnn.input.reshaped(f.rows(), f.cols());
  out.extractor = e.extractor.net.backward_from_output(ext_cache, grad_f);
  return out;
}

}  // namespace detail

// One self-labelling iteration. Returns the record; trains when the database
// was already full before this iteration's insert.
inline IterationRecord train_iteration(DdlEnsemble& e, ReplayDatabase& db, const TrainConfig& cfg, int iteration) {
  const Scenario s = generate_random(derive_seed(cfg.seed, streams::kTrainScenario, iteration), cfg.scenarios);
  e.check_compatible(s);
  const Matrix tensor = device_tensor(s, e.extractor.slots, e.config.scaling);
  const auto best = best_of_k(s, e);

  IterationRecord rec;
  rec.iteration = iteration;
  rec.chosen_cost = best.cost;
  rec.chosen_dnn = best.chosen;

  const bool was_full = db.full();
  db.push({std::vector<double>(tensor.data(), tensor.data() + tensor.size()),
           encode_decision(best.decision, e.num_servers_total), best.cost});
  if (!was_full || iteration % e.config.train_interval != 0) return rec;

  Rng rng(derive_seed(cfg.seed, streams::kBatchDraw, iteration));
  std::vector<std::vector<int>> batches;
  for (int k = 0; k < e.k(); ++k) batches.push_back(db.sample_indices(e.config.batch_size, rng));

  std::vector<detail::StepOutput> steps(e.k());
  parallel_for(e.k(), cfg.threads, [&](int k) { steps[k] = detail::train_batch(e, k, db, batches[k]); });

  auto ext_grad = e.extractor.net.zero_gradients();
  for (int k = 0; k < e.k(); ++k) {
    e.dnns[k].adam_step(steps[k].dnn);
    ext_grad += steps[k].extractor;
    rec.losses.push_back(steps[k].loss);
  }
  ext_grad *= 1.0 / e.k();
  e.extractor.net.adam_step(ext_grad);
  rec.trained = true;
  return rec;
}

inline TrainingTrace train(DdlEnsemble& e, ReplayDatabase& db, const TrainConfig& cfg,
                           const IterationObserver& observer = {}) {
  if (cfg.iterations < 0) throw ContractError("iterations must be non-negative");
  if (e.config.batch_size > db.capacity()) throw ContractError("batch size exceeds database capacity");
  check_config(cfg.scenarios);
  TrainingTrace trace;
  trace.reserve(cfg.iterations);
  for (int it = 1; it <= cfg.iterations; ++it) {
    trace.push_back(train_iteration(e, db, cfg, it));
    if (observer) observer(trace.back(), e);
  }
  return trace;
}

}  // namespace dtoff

#endif  // DTOFFLOAD_DDL_HPP_
