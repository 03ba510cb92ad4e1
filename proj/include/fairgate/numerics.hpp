/*
 * Copyright 2026 The fairgate Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

// Dense-network engine: row-major matrices, dense layers with cached
// activations, exact reverse-mode gradients and a central-difference oracle.
// All reductions run in index order so results are bitwise reproducible.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fairgate/error.hpp"
#include "fairgate/rng.hpp"

namespace fairgate {

using Vector = std::vector<double>;

struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), values(r * c, fill) {}

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows_in) {
    Matrix m;
    m.rows = rows_in.size();
    m.cols = m.rows == 0 ? 0 : rows_in.begin()->size();
    for (const auto& row : rows_in) {
      require(row.size() == m.cols, "dimension_mismatch", "ragged matrix literal");
      m.values.insert(m.values.end(), row.begin(), row.end());
    }
    return m;
  }

  double& operator()(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }

  std::span<const double> row(std::size_t r) const { return {values.data() + r * cols, cols}; }
  std::span<double> row(std::size_t r) { return {values.data() + r * cols, cols}; }

  bool operator==(const Matrix&) const = default;
};

enum class Activation { identity, relu, tanh, sigmoid };

inline std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
    case Activation::sigmoid: return "sigmoid";
  }
  return "identity";
}

inline Activation parse_activation(std::string_view name) {
  if (name == "identity") return Activation::identity;
  if (name == "relu") return Activation::relu;
  if (name == "tanh") return Activation::tanh;
  if (name == "sigmoid") return Activation::sigmoid;
  throw Error("invalid_config", "unknown activation '" + std::string(name) + "'");
}

struct LayerSpec {
  std::size_t in_dim = 1;
  std::size_t out_dim = 1;
  Activation activation = Activation::identity;

  bool operator==(const LayerSpec&) const = default;
};

struct DenseLayer {
  LayerSpec spec;
  Matrix weight;  // out_dim x in_dim
  Vector bias;    // out_dim

  bool operator==(const DenseLayer&) const = default;
};

/// Values retained by a forward pass for the matching backward pass.
struct DenseCache {
  Vector input;
  Vector pre_activation;
  Vector output;
};

struct LayerGradient {
  Matrix weight;
  Vector bias;

  void zero() {
    std::fill(weight.values.begin(), weight.values.end(), 0.0);
    std::fill(bias.begin(), bias.end(), 0.0);
  }
};

/// Gradient buffers aligned 1:1 with a list of dense layers.
class GradientTape {
 public:
  GradientTape() = default;
  explicit GradientTape(std::span<const DenseLayer> layers) {
    layers_.reserve(layers.size());
    for (const auto& l : layers) {
      layers_.push_back({Matrix(l.weight.rows, l.weight.cols), Vector(l.bias.size(), 0.0)});
    }
  }

  void zero() {
    for (auto& g : layers_) g.zero();
  }

  std::size_t size() const { return layers_.size(); }
  LayerGradient& operator[](std::size_t i) { return layers_[i]; }
  const LayerGradient& operator[](std::size_t i) const { return layers_[i]; }

 private:
  std::vector<LayerGradient> layers_;
};

// ---------------------------------------------------------------------------
// Scalar helpers

inline double stable_sigmoid(double x) {
  if (x >= 0.0) {
    const double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// log(1 + exp(x)) without overflow.
inline double softplus(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

inline bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

inline void require_finite(std::span<const double> v, const char* what) {
  require(all_finite(v), "non_finite", std::string(what) + " contains NaN or Inf");
}

inline double apply_activation(Activation a, double pre) {
  switch (a) {
    case Activation::identity: return pre;
    case Activation::relu: return pre > 0.0 ? pre : 0.0;
    case Activation::tanh: return std::tanh(pre);
    case Activation::sigmoid: return stable_sigmoid(pre);
  }
  return pre;
}

/// d output / d pre, expressed through the cached pair.
inline double activation_slope(Activation a, double pre, double out) {
  switch (a) {
    case Activation::identity: return 1.0;
    case Activation::relu: return pre > 0.0 ? 1.0 : 0.0;
    case Activation::tanh: return 1.0 - out * out;
    case Activation::sigmoid: return out * (1.0 - out);
  }
  return 1.0;
}

// ---------------------------------------------------------------------------
// Dense layers

inline Vector matvec(const Matrix& m, std::span<const double> x) {
  require(m.cols == x.size(), "dimension_mismatch",
          "matrix has " + std::to_string(m.cols) + " columns but vector has " +
              std::to_string(x.size()) + " entries");
  Vector out(m.rows, 0.0);
  for (std::size_t r = 0; r < m.rows; ++r) {
    const double* w = m.values.data() + r * m.cols;
    double acc = 0.0;
    for (std::size_t c = 0; c < m.cols; ++c) acc += w[c] * x[c];
    out[r] = acc;
  }
  return out;
}

inline Matrix matmul(const Matrix& a, const Matrix& b) {
  require(a.cols == b.rows, "dimension_mismatch", "matmul inner dimensions differ");
  Matrix out(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t j = 0; j < b.cols; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < a.cols; ++k) acc += a(i, k) * b(k, j);
      out(i, j) = acc;
    }
  }
  return out;
}

inline DenseCache dense_forward(const Matrix& weight, std::span<const double> bias,
                                std::span<const double> x, Activation activation) {
  require(bias.size() == weight.rows, "dimension_mismatch", "bias length differs from weight rows");
  DenseCache cache;
  cache.input.assign(x.begin(), x.end());
  cache.pre_activation = matvec(weight, x);
  for (std::size_t i = 0; i < bias.size(); ++i) cache.pre_activation[i] += bias[i];
  cache.output.resize(cache.pre_activation.size());
  for (std::size_t i = 0; i < cache.output.size(); ++i) {
    cache.output[i] = apply_activation(activation, cache.pre_activation[i]);
  }
  return cache;
}

inline DenseCache dense_forward(const DenseLayer& layer, std::span<const double> x) {
  return dense_forward(layer.weight, layer.bias, x, layer.spec.activation);
}

/// Upstream gradient w.r.t. the layer output -> gradient w.r.t. the
/// pre-activation.
inline Vector pre_activation_gradient(Activation activation, const DenseCache& cache,
                                      std::span<const double> upstream) {
  require(upstream.size() == cache.output.size(), "dimension_mismatch",
          "upstream gradient length differs from layer output");
  Vector delta(upstream.size());
  for (std::size_t i = 0; i < delta.size(); ++i) {
    delta[i] = upstream[i] * activation_slope(activation, cache.pre_activation[i], cache.output[i]);
  }
  return delta;
}

/// Accumulates dL/dW += delta x^T and dL/db += delta into `grad` (when given)
/// and returns dL/dx = W^T delta.
inline Vector dense_backward(const DenseLayer& layer, const DenseCache& cache,
                             std::span<const double> upstream, LayerGradient* grad) {
  require(!cache.input.empty() && cache.pre_activation.size() == layer.weight.rows,
          "missing_cache", "dense_backward called without a matching forward cache");
  const Vector delta = pre_activation_gradient(layer.spec.activation, cache, upstream);
  const Matrix& w = layer.weight;
  if (grad != nullptr) {
    for (std::size_t r = 0; r < w.rows; ++r) {
      double* g = grad->weight.values.data() + r * w.cols;
      for (std::size_t c = 0; c < w.cols; ++c) g[c] += delta[r] * cache.input[c];
      grad->bias[r] += delta[r];
    }
  }
  Vector downstream(w.cols, 0.0);
  for (std::size_t r = 0; r < w.rows; ++r) {
    const double* wr = w.values.data() + r * w.cols;
    for (std::size_t c = 0; c < w.cols; ++c) downstream[c] += wr[c] * delta[r];
  }
  return downstream;
}

/// Uniform init in [-sqrt(6/(fan_in+fan_out)), +sqrt(6/(fan_in+fan_out))].
inline void glorot_uniform(Matrix& m, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(m.rows + m.cols));
  for (double& v : m.values) v = rng.uniform(-limit, limit);
}

inline DenseLayer make_dense_layer(const LayerSpec& spec, Rng& rng) {
  require(spec.in_dim >= 1 && spec.out_dim >= 1, "invalid_argument", "layer dimensions must be >= 1");
  DenseLayer layer{spec, Matrix(spec.out_dim, spec.in_dim), Vector(spec.out_dim, 0.0)};
  glorot_uniform(layer.weight, rng);
  return layer;
}

inline void sgd_step(DenseLayer& layer, const LayerGradient& grad, double scale) {
  for (std::size_t i = 0; i < layer.weight.values.size(); ++i) {
    layer.weight.values[i] -= scale * grad.weight.values[i];
  }
  for (std::size_t i = 0; i < layer.bias.size(); ++i) layer.bias[i] -= scale * grad.bias[i];
}

// ---------------------------------------------------------------------------
// Losses

struct LossAndGradient {
  double loss = 0.0;
  Vector gradient;
};

inline Vector softmax(std::span<const double> logits) {
  const double shift = *std::max_element(logits.begin(), logits.end());
  Vector p(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = std::exp(logits[i] - shift);
    total += p[i];
  }
  for (double& v : p) v /= total;
  return p;
}

/// Softmax cross-entropy; the gradient is softmax(logits) - one_hot(label).
inline LossAndGradient stable_softmax_ce(std::span<const double> logits, std::size_t label) {
  require(!logits.empty() && label < logits.size(), "invalid_argument", "label outside logit range");
  require_finite(logits, "logits");
  const double shift = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (double l : logits) total += std::exp(l - shift);
  const double log_norm = shift + std::log(total);
  LossAndGradient out;
  out.loss = log_norm - logits[label];
  out.gradient.resize(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out.gradient[i] = std::exp(logits[i] - log_norm);
  out.gradient[label] -= 1.0;
  return out;
}

/// Binary cross-entropy on a logit: softplus(z) - t z, gradient sigmoid(z) - t.
inline LossAndGradient bce_with_logit(double logit, double target) {
  LossAndGradient out;
  out.loss = softplus(logit) - target * logit;
  out.gradient = {stable_sigmoid(logit) - target};
  return out;
}

// ---------------------------------------------------------------------------
// Finite-difference oracle

/// Central differences (f(p + h e_i) - f(p - h e_i)) / 2h over the
/// parameters reachable through `params`. Each parameter is restored after
/// probing.
inline Vector finite_difference_gradient(const std::function<double()>& loss,
                                         std::span<double* const> params, double h = 1e-5) {
  Vector grad(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    double* p = params[i];
    const double saved = *p;
    *p = saved + h;
    const double up = loss();
    *p = saved - h;
    const double down = loss();
    *p = saved;
    require(std::isfinite(up) && std::isfinite(down), "non_finite",
            "loss is not finite while probing parameter " + std::to_string(i));
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

inline Vector finite_difference_gradient(const std::function<double(std::span<const double>)>& loss,
                                         Vector params, double h = 1e-5) {
  std::vector<double*> handles;
  handles.reserve(params.size());
  for (double& p : params) handles.push_back(&p);
  return finite_difference_gradient([&] { return loss(params); }, handles, h);
}

/// max_i |a_i - b_i| / max(|a_i|, |b_i|, floor). The floor keeps coordinates
/// whose true gradient is ~0 from dominating the ratio.
inline double max_relative_error(std::span<const double> a, std::span<const double> b,
                                 double floor = 1e-6) {
  require(a.size() == b.size(), "dimension_mismatch", "gradient lengths differ");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double scale = std::max({std::abs(a[i]), std::abs(b[i]), floor});
    worst = std::max(worst, std::abs(a[i] - b[i]) / scale);
  }
  return worst;
}

inline void append_handles(std::vector<double*>& out, Matrix& m) {
  for (double& v : m.values) out.push_back(&v);
}

inline void append_handles(std::vector<double*>& out, Vector& v) {
  for (double& x : v) out.push_back(&x);
}

inline void append_values(Vector& out, const Matrix& m) {
  out.insert(out.end(), m.values.begin(), m.values.end());
}

inline void append_values(Vector& out, const Vector& v) { out.insert(out.end(), v.begin(), v.end()); }

}  // namespace fairgate
