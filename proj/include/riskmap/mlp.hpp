#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "riskmap/errors.hpp"
#include "riskmap/rng.hpp"

namespace riskmap {

enum class Transform { identity, exp, softplus, tanh };

inline const char* to_string(Transform t) {
  switch (t) {
    case Transform::identity: return "identity";
    case Transform::exp: return "exp";
    case Transform::softplus: return "softplus";
    default: return "tanh";
  }
}

inline Transform transform_from_string(const std::string& s) {
  if (s == "identity") return Transform::identity;
  if (s == "exp") return Transform::exp;
  if (s == "softplus") return Transform::softplus;
  if (s == "tanh") return Transform::tanh;
  throw ConfigError("unknown transform tag '" + s + "'");
}

inline double apply_transform(Transform t, double x) {
  switch (t) {
    case Transform::exp: return std::exp(x);
    case Transform::softplus: return x > 30.0 ? x : std::log1p(std::exp(x));
    case Transform::tanh: return std::tanh(x);
    default: return x;
  }
}

// d out / d raw expressed through raw input x.
inline double transform_derivative(Transform t, double x) {
  switch (t) {
    case Transform::exp: return std::exp(x);
    case Transform::softplus: return 1.0 / (1.0 + std::exp(-x));
    case Transform::tanh: {
      const double th = std::tanh(x);
      return 1.0 - th * th;
    }
    default: return 1.0;
  }
}

enum class Activation { tanh, identity };

// Dense feed-forward stack, tanh hidden layers, elementwise output transform.
// Gradients are hand-derived reverse mode, checked against finite differences.
struct MlpHead {
  std::vector<Eigen::MatrixXd> weights;  // layer l: out x in
  std::vector<Eigen::VectorXd> biases;
  std::vector<Activation> activations;   // per layer
  Transform transform = Transform::identity;

  MlpHead() = default;

  MlpHead(int input, const std::vector<int>& hidden, int output, Transform tf)
      : transform(tf) {
    int in = input;
    for (int h : hidden) {
      weights.emplace_back(Eigen::MatrixXd::Zero(h, in));
      biases.emplace_back(Eigen::VectorXd::Zero(h));
      activations.push_back(Activation::tanh);
      in = h;
    }
    weights.emplace_back(Eigen::MatrixXd::Zero(output, in));
    biases.emplace_back(Eigen::VectorXd::Zero(output));
    activations.push_back(Activation::identity);
  }

  int layers() const { return static_cast<int>(weights.size()); }
  int input_dim() const { return static_cast<int>(weights.front().cols()); }
  int output_dim() const { return static_cast<int>(weights.back().rows()); }

  int parameter_count() const {
    int n = 0;
    for (int l = 0; l < layers(); ++l)
      n += static_cast<int>(weights[l].size() + biases[l].size());
    return n;
  }

  void randomize(Rng& rng, double scale = 0.1) {
    for (int l = 0; l < layers(); ++l) {
      const double layer_scale = scale / std::sqrt(static_cast<double>(weights[l].cols()));
      for (int r = 0; r < weights[l].rows(); ++r)
        for (int c = 0; c < weights[l].cols(); ++c)
          weights[l](r, c) = rng.normal(0.0, layer_scale);
      biases[l].setZero();
    }
  }

  // Raw (pre-transform) forward pass.
  Eigen::VectorXd forward_raw(const Eigen::VectorXd& x) const {
    check_input(x);
    Eigen::VectorXd h = x;
    for (int l = 0; l < layers(); ++l) {
      h = weights[l] * h + biases[l];
      if (activations[l] == Activation::tanh)
        h = h.array().tanh().matrix();
    }
    return h;
  }

  Eigen::VectorXd forward(const Eigen::VectorXd& x) const {
    Eigen::VectorXd y = forward_raw(x);
    for (int i = 0; i < y.size(); ++i) y[i] = apply_transform(transform, y[i]);
    return y;
  }

  // Per-layer post-activation values, needed by backward().
  struct Trace {
    std::vector<Eigen::VectorXd> post;  // post[0] = input, post[l+1] = layer l output
    Eigen::VectorXd raw_out;            // pre-transform output
  };

  Trace forward_trace(const Eigen::VectorXd& x) const {
    check_input(x);
    Trace tr;
    tr.post.reserve(layers() + 1);
    tr.post.push_back(x);
    Eigen::VectorXd h = x;
    for (int l = 0; l < layers(); ++l) {
      h = weights[l] * h + biases[l];
      if (activations[l] == Activation::tanh)
        h = h.array().tanh().matrix();
      tr.post.push_back(h);
    }
    tr.raw_out = tr.post.back();
    return tr;
  }

  struct Grad {
    std::vector<Eigen::MatrixXd> d_weights;
    std::vector<Eigen::VectorXd> d_biases;

    explicit Grad(const MlpHead& head) {
      for (int l = 0; l < head.layers(); ++l) {
        d_weights.emplace_back(Eigen::MatrixXd::Zero(head.weights[l].rows(),
                                                     head.weights[l].cols()));
        d_biases.emplace_back(Eigen::VectorXd::Zero(head.biases[l].size()));
      }
    }

    void scale(double k) {
      for (auto& w : d_weights) w *= k;
      for (auto& b : d_biases) b *= k;
    }

    void add(const Grad& other) {
      for (size_t l = 0; l < d_weights.size(); ++l) {
        d_weights[l] += other.d_weights[l];
        d_biases[l] += other.d_biases[l];
      }
    }
  };

  // Accumulates d(loss)/d(params) into grad given d(loss)/d(transformed out).
  void backward(const Trace& tr, const Eigen::VectorXd& upstream, Grad& grad) const {
    if (upstream.size() != output_dim())
      throw ConfigError("backward: upstream size " + std::to_string(upstream.size()) +
                        " does not match output dim " + std::to_string(output_dim()));
    Eigen::VectorXd delta(upstream.size());
    for (int i = 0; i < upstream.size(); ++i)
      delta[i] = upstream[i] * transform_derivative(transform, tr.raw_out[i]);
    for (int l = layers() - 1; l >= 0; --l) {
      if (activations[l] == Activation::tanh) {
        const auto& post = tr.post[l + 1];
        for (int i = 0; i < delta.size(); ++i)
          delta[i] *= 1.0 - post[i] * post[i];
      }
      grad.d_weights[l] += delta * tr.post[l].transpose();
      grad.d_biases[l] += delta;
      if (l > 0) delta = weights[l].transpose() * delta;
    }
  }

  // Flat parameter vector, layer by layer, row-major weights then bias.
  Eigen::VectorXd flatten() const {
    Eigen::VectorXd v(parameter_count());
    int k = 0;
    for (int l = 0; l < layers(); ++l) {
      for (int r = 0; r < weights[l].rows(); ++r)
        for (int c = 0; c < weights[l].cols(); ++c) v[k++] = weights[l](r, c);
      for (int i = 0; i < biases[l].size(); ++i) v[k++] = biases[l][i];
    }
    return v;
  }

  void unflatten(const Eigen::VectorXd& v) {
    if (v.size() != parameter_count())
      throw ConfigError("unflatten: expected " + std::to_string(parameter_count()) +
                        " values, got " + std::to_string(v.size()));
    int k = 0;
    for (int l = 0; l < layers(); ++l) {
      for (int r = 0; r < weights[l].rows(); ++r)
        for (int c = 0; c < weights[l].cols(); ++c) weights[l](r, c) = v[k++];
      for (int i = 0; i < biases[l].size(); ++i) biases[l][i] = v[k++];
    }
  }

  static Eigen::VectorXd flatten_grad(const Grad& g) {
    int n = 0;
    for (size_t l = 0; l < g.d_weights.size(); ++l)
      n += static_cast<int>(g.d_weights[l].size() + g.d_biases[l].size());
    Eigen::VectorXd v(n);
    int k = 0;
    for (size_t l = 0; l < g.d_weights.size(); ++l) {
      for (int r = 0; r < g.d_weights[l].rows(); ++r)
        for (int c = 0; c < g.d_weights[l].cols(); ++c) v[k++] = g.d_weights[l](r, c);
      for (int i = 0; i < g.d_biases[l].size(); ++i) v[k++] = g.d_biases[l][i];
    }
    return v;
  }

 private:
  void check_input(const Eigen::VectorXd& x) const {
    if (x.size() != input_dim())
      throw ConfigError("mlp: input size " + std::to_string(x.size()) +
                        " does not match expected " + std::to_string(input_dim()));
  }
};

}  // namespace riskmap
