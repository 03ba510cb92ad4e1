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

// Conditional low-rank adapters. An adapter on layer j holds a down
// projection (rank x in_dim) and an up projection (out_dim x rank); when its
// gate is open it adds up * (down * input_j) to layer j's pre-activation,
// i.e. the layer runs with weight W_j + up * down. Gates are evaluated per
// sample; several open adapters on one layer add their deltas.

#include <cstddef>
#include <map>
#include <span>
#include <vector>

#include "fairgate/error.hpp"
#include "fairgate/model.hpp"
#include "fairgate/numerics.hpp"
#include "fairgate/rng.hpp"

namespace fairgate {

struct LoraAdapter {
  std::size_t target_layer = 0;
  Matrix down;  // rank x in_dim  (A)
  Matrix up;    // out_dim x rank (B)

  std::size_t rank() const { return down.rows; }
  std::size_t param_count() const { return down.values.size() + up.values.size(); }

  bool operator==(const LoraAdapter&) const = default;
};

/// One adapter serving one sensitive attribute.
struct AdapterUnit {
  LoraAdapter adapter;
  int attribute_id = 0;

  bool operator==(const AdapterUnit&) const = default;
};

inline std::size_t max_rank(const LayerSpec& layer) { return std::min(layer.in_dim, layer.out_dim) / 2; }

/// Random down projection, zero up projection: the delta starts at exactly 0.
inline LoraAdapter init_adapter(const LayerSpec& layer, std::size_t layer_index, std::size_t rank, Rng& rng) {
  require(rank >= 1 && rank <= max_rank(layer), "invalid_rank",
          "rank " + std::to_string(rank) + " outside [1, " + std::to_string(max_rank(layer)) +
              "] for a " + std::to_string(layer.out_dim) + "x" + std::to_string(layer.in_dim) + " layer");
  LoraAdapter a{layer_index, Matrix(rank, layer.in_dim), Matrix(layer.out_dim, rank)};
  glorot_uniform(a.down, rng);
  return a;
}

inline Matrix delta_weight(const LoraAdapter& a) { return matmul(a.up, a.down); }

inline void check_adapter(const BaseModel& model, const LoraAdapter& a) {
  require(a.target_layer < model.depth(), "invalid_adapter", "adapter targets a layer past the model depth");
  const auto& spec = model.layers[a.target_layer].spec;
  require(a.down.cols == spec.in_dim && a.up.rows == spec.out_dim && a.up.cols == a.down.rows,
          "invalid_adapter", "adapter shape does not match layer " + std::to_string(a.target_layer));
}

using AttributeScores = std::map<int, double>;

/// Gate per unit: open iff the unit's attribute score is strictly above tau.
inline std::vector<bool> resolve_gates(std::span<const AdapterUnit> units, const AttributeScores& scores,
                                       double tau) {
  std::vector<bool> open(units.size(), false);
  for (std::size_t u = 0; u < units.size(); ++u) {
    const auto it = scores.find(units[u].attribute_id);
    require(it != scores.end(), "missing_score",
            "no detector score for attribute " + std::to_string(units[u].attribute_id));
    open[u] = it->second > tau;
  }
  return open;
}

/// Adapter contribution for one sample: up * (down * input).
struct AdapterCache {
  Vector projected;  // down * input, length rank
};

/// Forward pass with the adapters whose gate is open. Layers without an open
/// adapter run exactly the base computation.
inline ForwardTrace conditional_forward(const BaseModel& model, std::span<const AdapterUnit> units,
                                        std::span<const double> x, const std::vector<bool>& open,
                                        std::vector<AdapterCache>* caches = nullptr) {
  require(open.size() == units.size(), "dimension_mismatch", "one gate per adapter unit required");
  require(x.size() == model.input_dim(), "dimension_mismatch", "input width differs from model input");
  if (caches != nullptr) caches->assign(units.size(), {});
  ForwardTrace trace;
  trace.layers.reserve(model.depth());
  std::span<const double> current = x;
  for (std::size_t l = 0; l < model.depth(); ++l) {
    const DenseLayer& layer = model.layers[l];
    bool touched = false;
    for (std::size_t u = 0; u < units.size(); ++u) touched = touched || (open[u] && units[u].adapter.target_layer == l);
    if (!touched) {
      trace.layers.push_back(dense_forward(layer, current));
    } else {
      DenseCache cache;
      cache.input.assign(current.begin(), current.end());
      cache.pre_activation = matvec(layer.weight, current);
      for (std::size_t i = 0; i < layer.bias.size(); ++i) cache.pre_activation[i] += layer.bias[i];
      for (std::size_t u = 0; u < units.size(); ++u) {
        if (!open[u] || units[u].adapter.target_layer != l) continue;
        const LoraAdapter& a = units[u].adapter;
        Vector projected = matvec(a.down, current);
        const Vector lifted = matvec(a.up, projected);
        for (std::size_t i = 0; i < lifted.size(); ++i) cache.pre_activation[i] += lifted[i];
        if (caches != nullptr) (*caches)[u].projected = std::move(projected);
      }
      cache.output.resize(cache.pre_activation.size());
      for (std::size_t i = 0; i < cache.output.size(); ++i) {
        cache.output[i] = apply_activation(layer.spec.activation, cache.pre_activation[i]);
      }
      trace.layers.push_back(std::move(cache));
    }
    current = trace.layers.back().output;
  }
  return trace;
}

inline ForwardTrace conditional_forward(const BaseModel& model, std::span<const AdapterUnit> units,
                                        std::span<const double> x, const AttributeScores& scores, double tau) {
  return conditional_forward(model, units, x, resolve_gates(units, scores, tau));
}

struct AdapterGradient {
  Matrix down;
  Matrix up;

  static AdapterGradient zeros_like(const LoraAdapter& a) {
    return {Matrix(a.down.rows, a.down.cols), Matrix(a.up.rows, a.up.cols)};
  }
};

inline std::vector<AdapterGradient> zero_adapter_gradients(std::span<const AdapterUnit> units) {
  std::vector<AdapterGradient> grads;
  grads.reserve(units.size());
  for (const auto& u : units) grads.push_back(AdapterGradient::zeros_like(u.adapter));
  return grads;
}

/// Reverse pass through a conditional forward trace. `dlogits` may be empty
/// (no task gradient). `injected` adds dL/dh^(l) for representation-level
/// losses. Adapter gradients accumulate into `adapter_grads` for open units;
/// base gradients accumulate into `base_grads` when given. Returns dL/dx.
inline Vector conditional_backward(const BaseModel& model, std::span<const AdapterUnit> units,
                                   const std::vector<bool>& open, const ForwardTrace& trace,
                                   const std::vector<AdapterCache>& caches, std::span<const double> dlogits,
                                   const std::map<std::size_t, Vector>& injected,
                                   std::vector<AdapterGradient>* adapter_grads, GradientTape* base_grads) {
  Vector upstream = dlogits.empty() ? Vector(model.class_count, 0.0) : Vector(dlogits.begin(), dlogits.end());
  for (std::size_t l = model.depth(); l-- > 0;) {
    if (const auto it = injected.find(l); it != injected.end()) {
      for (std::size_t i = 0; i < upstream.size(); ++i) upstream[i] += it->second[i];
    }
    const DenseLayer& layer = model.layers[l];
    const DenseCache& cache = trace.layers[l];
    const Vector delta = pre_activation_gradient(layer.spec.activation, cache, upstream);
    Vector downstream(layer.spec.in_dim, 0.0);
    for (std::size_t r = 0; r < layer.weight.rows; ++r) {
      const double* wr = layer.weight.values.data() + r * layer.weight.cols;
      for (std::size_t c = 0; c < layer.weight.cols; ++c) downstream[c] += wr[c] * delta[r];
    }
    if (base_grads != nullptr) {
      LayerGradient& g = (*base_grads)[l];
      for (std::size_t r = 0; r < layer.weight.rows; ++r) {
        for (std::size_t c = 0; c < layer.weight.cols; ++c) g.weight(r, c) += delta[r] * cache.input[c];
        g.bias[r] += delta[r];
      }
    }
    for (std::size_t u = 0; u < units.size(); ++u) {
      if (!open[u] || units[u].adapter.target_layer != l) continue;
      const LoraAdapter& a = units[u].adapter;
      const Vector& projected = caches.at(u).projected;
      // d/d up = delta projected^T ; d/d projected = up^T delta
      Vector dprojected(a.rank(), 0.0);
      for (std::size_t r = 0; r < a.up.rows; ++r) {
        for (std::size_t k = 0; k < a.up.cols; ++k) dprojected[k] += a.up(r, k) * delta[r];
      }
      if (adapter_grads != nullptr) {
        AdapterGradient& g = (*adapter_grads)[u];
        for (std::size_t r = 0; r < a.up.rows; ++r) {
          for (std::size_t k = 0; k < a.up.cols; ++k) g.up(r, k) += delta[r] * projected[k];
        }
        for (std::size_t k = 0; k < a.down.rows; ++k) {
          for (std::size_t c = 0; c < a.down.cols; ++c) g.down(k, c) += dprojected[k] * cache.input[c];
        }
      }
      for (std::size_t k = 0; k < a.down.rows; ++k) {
        for (std::size_t c = 0; c < a.down.cols; ++c) downstream[c] += a.down(k, c) * dprojected[k];
      }
    }
    upstream = std::move(downstream);
  }
  return upstream;
}

inline void sgd_step(LoraAdapter& a, const AdapterGradient& g, double scale) {
  for (std::size_t i = 0; i < a.down.values.size(); ++i) a.down.values[i] -= scale * g.down.values[i];
  for (std::size_t i = 0; i < a.up.values.size(); ++i) a.up.values[i] -= scale * g.up.values[i];
}

}  // namespace fairgate
