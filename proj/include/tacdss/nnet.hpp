#pragma once

// Fully connected feedforward network with an analytic residual Jacobian.
//
// Parameters are flattened layer by layer: the weight matrix of a layer in
// row-major order (row = output unit), followed by that layer's bias vector.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tacdss/errors.hpp"
#include "tacdss/random.hpp"

namespace tacdss::nnet {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using ParamVector = Eigen::VectorXd;

enum class Activation { kTanh, kIdentity };

inline std::string to_string(Activation a) { return a == Activation::kTanh ? "tanh" : "identity"; }

inline Activation activation_from_string(const std::string& name) {
  if (name == "tanh") return Activation::kTanh;
  if (name == "identity") return Activation::kIdentity;
  throw InvalidArgument("unknown activation '" + name + "'");
}

struct Sample {
  Vector input;
  Vector target;
};

using Batch = std::vector<Sample>;

class Network {
 public:
  Network() = default;

  /// Zero-initialized network. layer_sizes = {inputs, hidden..., outputs}.
  explicit Network(std::vector<int> layer_sizes, Activation hidden = Activation::kTanh)
      : layer_sizes_(std::move(layer_sizes)), hidden_activation_(hidden) {
    if (layer_sizes_.size() < 2) throw InvalidArgument("network needs at least an input and an output layer");
    for (int size : layer_sizes_) {
      if (size < 1) throw InvalidArgument("layer sizes must be positive");
    }
    for (std::size_t l = 0; l + 1 < layer_sizes_.size(); ++l) {
      weights_.push_back(Matrix::Zero(layer_sizes_[l + 1], layer_sizes_[l]));
      biases_.push_back(Vector::Zero(layer_sizes_[l + 1]));
    }
  }

  /// Weights and biases drawn uniformly from [-scale, scale].
  static Network random(std::vector<int> layer_sizes, std::uint64_t seed, double scale = 0.5,
                        Activation hidden = Activation::kTanh) {
    Network net(std::move(layer_sizes), hidden);
    Rng rng(seed);
    ParamVector params(net.param_count());
    for (Eigen::Index p = 0; p < params.size(); ++p) params(p) = rng.uniform(-scale, scale);
    net.set_params(params);
    return net;
  }

  bool empty() const { return layer_sizes_.empty(); }
  const std::vector<int>& layer_sizes() const { return layer_sizes_; }
  Activation hidden_activation() const { return hidden_activation_; }
  std::size_t layer_count() const { return weights_.size(); }
  int inputs() const { return empty() ? 0 : layer_sizes_.front(); }
  int outputs() const { return empty() ? 0 : layer_sizes_.back(); }

  const Matrix& weights(std::size_t layer) const { return weights_.at(layer); }
  const Vector& biases(std::size_t layer) const { return biases_.at(layer); }
  Matrix& weights(std::size_t layer) { return weights_.at(layer); }
  Vector& biases(std::size_t layer) { return biases_.at(layer); }

  Eigen::Index param_count() const {
    Eigen::Index count = 0;
    for (std::size_t l = 0; l < weights_.size(); ++l) count += weights_[l].size() + biases_[l].size();
    return count;
  }

  ParamVector params() const {
    ParamVector out(param_count());
    Eigen::Index p = 0;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      for (Eigen::Index r = 0; r < weights_[l].rows(); ++r) {
        for (Eigen::Index c = 0; c < weights_[l].cols(); ++c) out(p++) = weights_[l](r, c);
      }
      for (Eigen::Index r = 0; r < biases_[l].size(); ++r) out(p++) = biases_[l](r);
    }
    return out;
  }

  void set_params(const ParamVector& params) {
    if (params.size() != param_count()) {
      throw InvalidArgument("parameter vector has " + std::to_string(params.size()) + " entries, expected " +
                            std::to_string(param_count()));
    }
    if (!params.allFinite()) throw InvalidArgument("non-finite network parameter");
    Eigen::Index p = 0;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      for (Eigen::Index r = 0; r < weights_[l].rows(); ++r) {
        for (Eigen::Index c = 0; c < weights_[l].cols(); ++c) weights_[l](r, c) = params(p++);
      }
      for (Eigen::Index r = 0; r < biases_[l].size(); ++r) biases_[l](r) = params(p++);
    }
  }

  /// Activation applied after layer `layer` (hidden layers only; output is linear).
  Activation activation_of(std::size_t layer) const {
    return layer + 1 == weights_.size() ? Activation::kIdentity : hidden_activation_;
  }

  friend bool operator==(const Network& a, const Network& b) {
    return a.layer_sizes_ == b.layer_sizes_ && a.hidden_activation_ == b.hidden_activation_ &&
           a.params() == b.params();
  }

 private:
  std::vector<int> layer_sizes_;
  Activation hidden_activation_ = Activation::kTanh;
  std::vector<Matrix> weights_;
  std::vector<Vector> biases_;
};

namespace detail {

inline double activate(Activation a, double z) { return a == Activation::kTanh ? std::tanh(z) : z; }

// Derivative expressed through the activation output.
inline double activate_prime(Activation a, double y) { return a == Activation::kTanh ? 1.0 - y * y : 1.0; }

/// Outputs of every layer, index 0 being the input itself.
inline std::vector<Vector> forward_trace(const Network& net, const Vector& input) {
  if (net.empty()) throw ModelNotReady("network has no layers");
  if (input.size() != net.inputs()) {
    throw InvalidArgument("network expects " + std::to_string(net.inputs()) + " inputs, got " +
                          std::to_string(input.size()));
  }
  if (!input.allFinite()) throw InvalidArgument("non-finite network input");
  std::vector<Vector> trace;
  trace.reserve(net.layer_count() + 1);
  trace.push_back(input);
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    Vector z = net.weights(l) * trace.back() + net.biases(l);
    const Activation act = net.activation_of(l);
    for (Eigen::Index k = 0; k < z.size(); ++k) z(k) = activate(act, z(k));
    trace.push_back(std::move(z));
  }
  return trace;
}

inline void require_batch(const Network& net, const Batch& batch) {
  if (batch.empty()) throw InvalidArgument("empty batch");
  for (const auto& sample : batch) {
    if (sample.target.size() != net.outputs()) {
      throw InvalidArgument("target has " + std::to_string(sample.target.size()) + " entries, network has " +
                            std::to_string(net.outputs()) + " outputs");
    }
    if (!sample.target.allFinite()) throw InvalidArgument("non-finite target");
  }
}

}  // namespace detail

inline Vector forward(const Network& net, const Vector& input) {
  return detail::forward_trace(net, input).back();
}

/// e = target - output, sample-major then output-minor.
inline Vector residuals(const Network& net, const Batch& batch) {
  detail::require_batch(net, batch);
  const Eigen::Index outs = net.outputs();
  Vector e(outs * static_cast<Eigen::Index>(batch.size()));
  for (std::size_t s = 0; s < batch.size(); ++s) {
    e.segment(static_cast<Eigen::Index>(s) * outs, outs) = batch[s].target - forward(net, batch[s].input);
  }
  return e;
}

/// d e_r / d param_p by backpropagation, rows ordered like residuals().
inline Matrix jacobian(const Network& net, const Batch& batch) {
  detail::require_batch(net, batch);
  const Eigen::Index outs = net.outputs();
  const std::size_t layers = net.layer_count();

  std::vector<Eigen::Index> offset(layers);
  Eigen::Index p = 0;
  for (std::size_t l = 0; l < layers; ++l) {
    offset[l] = p;
    p += net.weights(l).size() + net.biases(l).size();
  }

  Matrix jac(outs * static_cast<Eigen::Index>(batch.size()), net.param_count());
  for (std::size_t s = 0; s < batch.size(); ++s) {
    const auto trace = detail::forward_trace(net, batch[s].input);
    for (Eigen::Index o = 0; o < outs; ++o) {
      const Eigen::Index row = static_cast<Eigen::Index>(s) * outs + o;
      // de/dy = -1 for output o; the output layer is linear.
      Vector delta = Vector::Zero(outs);
      delta(o) = -1.0;
      for (std::size_t l = layers; l-- > 0;) {
        const Vector& below = trace[l];
        const Matrix& w = net.weights(l);
        Eigen::Index q = offset[l];
        for (Eigen::Index r = 0; r < w.rows(); ++r) {
          for (Eigen::Index c = 0; c < w.cols(); ++c) jac(row, q++) = delta(r) * below(c);
        }
        for (Eigen::Index r = 0; r < w.rows(); ++r) jac(row, q++) = delta(r);
        if (l == 0) break;
        Vector next = w.transpose() * delta;
        const Activation act = net.activation_of(l - 1);
        for (Eigen::Index k = 0; k < next.size(); ++k) next(k) *= detail::activate_prime(act, below(k));
        delta = std::move(next);
      }
    }
  }
  return jac;
}

inline double sse(const Network& net, const Batch& batch) { return residuals(net, batch).squaredNorm(); }

inline double mse(const Network& net, const Batch& batch) {
  return sse(net, batch) / static_cast<double>(net.outputs() * static_cast<Eigen::Index>(batch.size()));
}

inline double rmse(const Network& net, const Batch& batch) { return std::sqrt(mse(net, batch)); }

}  // namespace tacdss::nnet
