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

// Feed-forward network with dense layers, ReLU / Sigmoid / Identity
// activations, binary cross-entropy loss and Adam. Samples are columns:
// a batch of B inputs is an (inputs x B) matrix.

#ifndef DTOFFLOAD_NEURAL_HPP_
#define DTOFFLOAD_NEURAL_HPP_

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "dtoffload/errors.hpp"
#include "dtoffload/random.hpp"

namespace dtoff {

enum class Activation { kIdentity, kRelu, kSigmoid };

inline std::string to_string(Activation a) {
  switch (a) {
    case Activation::kIdentity: return "identity";
    case Activation::kRelu: return "relu";
    case Activation::kSigmoid: return "sigmoid";
  }
  return "?";
}

inline Activation activation_from_string(const std::string& s) {
  if (s == "identity") return Activation::kIdentity;
  if (s == "relu") return Activation::kRelu;
  if (s == "sigmoid") return Activation::kSigmoid;
  throw ParseError("unknown activation '" + s + "'", "activation");
}

struct LayerSpec {
  int units = 0;
  Activation activation = Activation::kRelu;
  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct Architecture {
  int inputs = 0;
  std::vector<LayerSpec> layers;
  friend bool operator==(const Architecture&, const Architecture&) = default;
};

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  friend bool operator==(const AdamConfig&, const AdamConfig&) = default;
};

// Clamp applied to network outputs inside the cross-entropy only.
inline constexpr double kLossClamp = 1e-7;

template <typename Scalar = double>
class Mlp {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  struct Layer {
    Matrix weights;  // out x in
    Vector bias;     // out
    Activation activation = Activation::kRelu;
  };

  struct AdamState {
    std::vector<Matrix> m_weights, v_weights;
    std::vector<Vector> m_bias, v_bias;
    std::int64_t step = 0;
  };

  struct Gradients {
    std::vector<Matrix> weights;
    std::vector<Vector> bias;
    Matrix input;  // dL/d(input), same shape as the forward input

    Gradients& operator+=(const Gradients& o) {
      for (std::size_t k = 0; k < weights.size(); ++k) {
        weights[k] += o.weights[k];
        bias[k] += o.bias[k];
      }
      return *this;
    }
    Gradients& operator*=(Scalar c) {
      for (std::size_t k = 0; k < weights.size(); ++k) {
        weights[k] *= c;
        bias[k] *= c;
      }
      return *this;
    }
  };

  // Activations kept by forward() for the backward pass.
  struct Cache {
    Matrix input;
    std::vector<Matrix> pre;   // W x + b per layer
    std::vector<Matrix> post;  // activation(pre) per layer
    const Matrix& output() const { return post.back(); }
  };

  Mlp() = default;

  // Weights ~ N(0, 1/fan_in), zero biases, zero Adam moments.
  static Mlp init_random(const Architecture& arch, std::uint64_t seed, AdamConfig adam = {}) {
    if (arch.layers.empty() || arch.inputs <= 0) throw ContractError("architecture is empty");
    Mlp m;
    m.adam_ = adam;
    Rng rng(seed);
    int in = arch.inputs;
    for (const auto& spec : arch.layers) {
      if (spec.units <= 0) throw ContractError("layer with no units");
      Layer l;
      l.activation = spec.activation;
      l.weights.resize(spec.units, in);
      std::normal_distribution<double> dist(0.0, 1.0 / std::sqrt(static_cast<double>(in)));
      // Row-major fill keeps the draw order independent of Eigen storage.
      for (int r = 0; r < spec.units; ++r)
        for (int c = 0; c < in; ++c) l.weights(r, c) = static_cast<Scalar>(dist(rng));
      l.bias = Vector::Zero(spec.units);
      m.layers_.push_back(std::move(l));
      in = spec.units;
    }
    m.reset_adam();
    return m;
  }

  // Builds a model from explicit layers (all moments zeroed).
  static Mlp from_layers(std::vector<Layer> layers, AdamConfig adam = {}) {
    Mlp m;
    m.layers_ = std::move(layers);
    m.adam_ = adam;
    m.check_chain();
    m.reset_adam();
    return m;
  }

  int input_size() const { return static_cast<int>(layers_.front().weights.cols()); }
  int output_size() const { return static_cast<int>(layers_.back().weights.rows()); }
  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<Layer>& mutable_layers() { return layers_; }
  const AdamState& adam_state() const { return state_; }
  const AdamConfig& adam_config() const { return adam_; }
  void set_learning_rate(double lr) { adam_.learning_rate = lr; }

  Architecture architecture() const {
    Architecture a;
    a.inputs = input_size();
    for (const auto& l : layers_) a.layers.push_back({static_cast<int>(l.weights.rows()), l.activation});
    return a;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l.weights.size() + l.bias.size();
    return n;
  }

  Cache forward(const Matrix& x) const {
    if (x.rows() != input_size())
      throw ContractError("input has " + std::to_string(x.rows()) + " rows, network expects " +
                          std::to_string(input_size()));
    Cache c;
    c.input = x;
    c.pre.reserve(layers_.size());
    c.post.reserve(layers_.size());
    const Matrix* in = &c.input;
    for (const auto& l : layers_) {
      c.pre.push_back((l.weights * *in).colwise() + l.bias);
      c.post.push_back(activate(c.pre.back(), l.activation));
      in = &c.post.back();
    }
    return c;
  }

  // Output only; no cache kept.
  Matrix predict(const Matrix& x) const {
    if (x.rows() != input_size()) throw ContractError("input dimension mismatch");
    Matrix h = x;
    for (const auto& l : layers_) h = activate((l.weights * h).colwise() + l.bias, l.activation);
    return h;
  }

  Vector predict(const Vector& x) const { return predict(Matrix(x)).col(0); }

  // Mean over the batch of the summed binary cross-entropy per sample.
  static Scalar cross_entropy(const Matrix& output, const Matrix& target) {
    if (output.rows() != target.rows() || output.cols() != target.cols())
      throw ContractError("target shape differs from output shape");
    const Scalar lo = static_cast<Scalar>(kLossClamp);
    const Scalar hi = static_cast<Scalar>(1.0 - kLossClamp);
    const Matrix f = output.cwiseMax(lo).cwiseMin(hi);
    const Matrix ones = Matrix::Ones(f.rows(), f.cols());
    const Scalar total =
        (target.array() * f.array().log() + (ones - target).array() * (ones - f).array().log()).sum();
    return -total / static_cast<Scalar>(output.cols());
  }

  // Gradient of cross_entropy(forward(x), target) for a Sigmoid head. At the
  // logits it reduces to (f - target) / B.
  Gradients backward(const Cache& cache, const Matrix& target) const {
    if (layers_.back().activation != Activation::kSigmoid)
      throw ContractError("cross-entropy backward needs a sigmoid output layer");
    const Matrix& f = cache.output();
    if (target.rows() != f.rows() || target.cols() != f.cols())
      throw ContractError("target shape differs from output shape");
    for (Eigen::Index i = 0; i < target.size(); ++i) {
      const Scalar t = target.data()[i];
      if (t != Scalar(0) && t != Scalar(1)) throw ContractError("cross-entropy target outside {0,1}");
    }
    Matrix delta = (f - target) / static_cast<Scalar>(f.cols());
    return backprop(cache, std::move(delta));
  }

  Gradients backward(const Matrix& x, const Matrix& target) const { return backward(forward(x), target); }

  // Backpropagates an upstream gradient dL/d(output) through every layer.
  Gradients backward_from_output(const Cache& cache, const Matrix& grad_output) const {
    if (grad_output.rows() != cache.output().rows() || grad_output.cols() != cache.output().cols())
      throw ContractError("output gradient shape mismatch");
    Matrix delta =
        grad_output.cwiseProduct(derivative(cache.pre.back(), cache.post.back(), layers_.back().activation));
    return backprop(cache, std::move(delta));
  }

  void adam_step(const Gradients& g) {
    if (g.weights.size() != layers_.size()) throw ContractError("gradient layer count mismatch");
    for (std::size_t k = 0; k < layers_.size(); ++k)
      if (g.weights[k].rows() != layers_[k].weights.rows() ||
          g.weights[k].cols() != layers_[k].weights.cols() ||
          g.bias[k].size() != layers_[k].bias.size())
        throw ContractError("gradient shape mismatch in layer " + std::to_string(k));
    ++state_.step;
    const Scalar b1 = static_cast<Scalar>(adam_.beta1);
    const Scalar b2 = static_cast<Scalar>(adam_.beta2);
    const Scalar c1 = Scalar(1) - static_cast<Scalar>(std::pow(adam_.beta1, state_.step));
    const Scalar c2 = Scalar(1) - static_cast<Scalar>(std::pow(adam_.beta2, state_.step));
    const Scalar lr = static_cast<Scalar>(adam_.learning_rate);
    const Scalar eps = static_cast<Scalar>(adam_.epsilon);
    auto update = [&](auto& param, auto& m, auto& v, const auto& grad) {
      m = b1 * m + (Scalar(1) - b1) * grad;
      v = b2 * v + (Scalar(1) - b2) * grad.cwiseProduct(grad);
      param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
    };
    for (std::size_t k = 0; k < layers_.size(); ++k) {
      update(layers_[k].weights, state_.m_weights[k], state_.v_weights[k], g.weights[k]);
      update(layers_[k].bias, state_.m_bias[k], state_.v_bias[k], g.bias[k]);
    }
  }

  Gradients zero_gradients() const {
    Gradients g;
    for (const auto& l : layers_) {
      g.weights.push_back(Matrix::Zero(l.weights.rows(), l.weights.cols()));
      g.bias.push_back(Vector::Zero(l.bias.size()));
    }
    return g;
  }

  friend bool operator==(const Mlp& a, const Mlp& b) {
    if (a.layers_.size() != b.layers_.size() || !(a.adam_ == b.adam_) ||
        a.state_.step != b.state_.step)
      return false;
    for (std::size_t k = 0; k < a.layers_.size(); ++k) {
      const auto& x = a.layers_[k];
      const auto& y = b.layers_[k];
      if (x.activation != y.activation || x.weights != y.weights || x.bias != y.bias ||
          a.state_.m_weights[k] != b.state_.m_weights[k] ||
          a.state_.v_weights[k] != b.state_.v_weights[k] ||
          a.state_.m_bias[k] != b.state_.m_bias[k] || a.state_.v_bias[k] != b.state_.v_bias[k])
        return false;
    }
    return true;
  }

  // ---- checkpoint -------------------------------------------------------

  static constexpr int kFormatVersion = 1;

  nlohmann::json to_json() const {
    using nlohmann::json;
    auto mat = [](const Matrix& m) {
      std::vector<double> v;
      v.reserve(m.size());
      for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) v.push_back(static_cast<double>(m(r, c)));
      return v;
    };
    auto vec = [](const Vector& x) {
      return std::vector<double>(x.data(), x.data() + x.size());
    };
    json j;
    j["format"] = "dtoffload.mlp";
    j["version"] = kFormatVersion;
    j["inputs"] = input_size();
    j["adam"] = {{"learning_rate", adam_.learning_rate},
                 {"beta1", adam_.beta1},
                 {"beta2", adam_.beta2},
                 {"epsilon", adam_.epsilon},
                 {"step", state_.step}};
    j["layers"] = json::array();
    for (std::size_t k = 0; k < layers_.size(); ++k) {
      const auto& l = layers_[k];
      j["layers"].push_back({{"units", l.weights.rows()},
                             {"activation", dtoff::to_string(l.activation)},
                             {"weights", mat(l.weights)},
                             {"bias", vec(l.bias)},
                             {"m_weights", mat(state_.m_weights[k])},
                             {"v_weights", mat(state_.v_weights[k])},
                             {"m_bias", vec(state_.m_bias[k])},
                             {"v_bias", vec(state_.v_bias[k])}});
    }
    return j;
  }

  static Mlp from_json(const nlohmann::json& j) {
    try {
      if (j.at("format").get<std::string>() != "dtoffload.mlp") throw ParseError("not an mlp", "/format");
      if (j.at("version").get<int>() != kFormatVersion) throw ParseError("unsupported version", "/version");
      Mlp m;
      const auto& a = j.at("adam");
      m.adam_ = {a.at("learning_rate").get<double>(), a.at("beta1").get<double>(),
                 a.at("beta2").get<double>(), a.at("epsilon").get<double>()};
      int in = j.at("inputs").get<int>();
      auto mat = [](const nlohmann::json& v, int rows, int cols, const std::string& where) {
        const auto flat = v.get<std::vector<double>>();
        if (flat.size() != static_cast<std::size_t>(rows) * cols) throw ParseError("bad matrix size", where);
        Matrix out(rows, cols);
        for (int r = 0; r < rows; ++r)
          for (int c = 0; c < cols; ++c) out(r, c) = static_cast<Scalar>(flat[r * cols + c]);
        return out;
      };
      auto vec = [](const nlohmann::json& v, int n, const std::string& where) {
        const auto flat = v.get<std::vector<double>>();
        if (flat.size() != static_cast<std::size_t>(n)) throw ParseError("bad vector size", where);
        Vector out(n);
        for (int i = 0; i < n; ++i) out(i) = static_cast<Scalar>(flat[i]);
        return out;
      };
      const auto& layers = j.at("layers");
      for (std::size_t k = 0; k < layers.size(); ++k) {
        const auto& lj = layers[k];
        const std::string where = "/layers/" + std::to_string(k);
        const int out = lj.at("units").get<int>();
        Layer l;
        l.activation = activation_from_string(lj.at("activation").get<std::string>());
        l.weights = mat(lj.at("weights"), out, in, where);
        l.bias = vec(lj.at("bias"), out, where);
        m.state_.m_weights.push_back(mat(lj.at("m_weights"), out, in, where));
        m.state_.v_weights.push_back(mat(lj.at("v_weights"), out, in, where));
        m.state_.m_bias.push_back(vec(lj.at("m_bias"), out, where));
        m.state_.v_bias.push_back(vec(lj.at("v_bias"), out, where));
        m.layers_.push_back(std::move(l));
        in = out;
      }
      if (m.layers_.empty()) throw ParseError("no layers", "/layers");
      m.state_.step = a.at("step").get<std::int64_t>();
      return m;
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("malformed mlp checkpoint: ") + e.what(), "mlp");
    }
  }

 private:
  static Matrix activate(const Matrix& z, Activation a) {
    switch (a) {
      case Activation::kIdentity: return z;
      case Activation::kRelu: return z.cwiseMax(Scalar(0));
      case Activation::kSigmoid: return (Scalar(1) + (-z.array()).exp()).inverse().matrix();
    }
    return z;
  }

  static Matrix derivative(const Matrix& pre, const Matrix& post, Activation a) {
    switch (a) {
      case Activation::kIdentity: return Matrix::Ones(pre.rows(), pre.cols());
      case Activation::kRelu: return (pre.array() > Scalar(0)).template cast<Scalar>().matrix();
      case Activation::kSigmoid: return (post.array() * (Scalar(1) - post.array())).matrix();
    }
    return Matrix::Ones(pre.rows(), pre.cols());
  }

  // `delta` is dL/d(pre-activation) of the last layer.
  Gradients backprop(const Cache& cache, Matrix delta) const {
    const std::size_t L = layers_.size();
    Gradients g;
    g.weights.resize(L);
    g.bias.resize(L);
    for (std::size_t k = L; k-- > 0;) {
      const Matrix& in = k == 0 ? cache.input : cache.post[k - 1];
      g.weights[k].noalias() = delta * in.transpose();
      g.bias[k] = delta.rowwise().sum();
      Matrix d_in = layers_[k].weights.transpose() * delta;
      if (k == 0) {
        g.input = std::move(d_in);
      } else {
        delta = d_in.cwiseProduct(derivative(cache.pre[k - 1], cache.post[k - 1], layers_[k - 1].activation));
      }
    }
    return g;
  }

  void check_chain() const {
    if (layers_.empty()) throw ContractError("architecture is empty");
    for (std::size_t k = 0; k < layers_.size(); ++k) {
      if (layers_[k].bias.size() != layers_[k].weights.rows())
        throw ContractError("bias size differs from layer width");
      if (k > 0 && layers_[k].weights.cols() != layers_[k - 1].weights.rows())
        throw ContractError("layer " + std::to_string(k) + " input does not match previous output");
    }
  }

  void reset_adam() {
    state_ = {};
    for (const auto& l : layers_) {
      state_.m_weights.push_back(Matrix::Zero(l.weights.rows(), l.weights.cols()));
      state_.v_weights.push_back(Matrix::Zero(l.weights.rows(), l.weights.cols()));
      state_.m_bias.push_back(Vector::Zero(l.bias.size()));
      state_.v_bias.push_back(Vector::Zero(l.bias.size()));
    }
  }

  std::vector<Layer> layers_;
  AdamState state_;
  AdamConfig adam_;
};

using MlpModel = Mlp<double>;

}  // namespace dtoff

#endif  // DTOFFLOAD_NEURAL_HPP_
