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

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "fairgate/data.hpp"
#include "fairgate/error.hpp"
#include "fairgate/numerics.hpp"
#include "fairgate/rng.hpp"

namespace fairgate {

/// Frozen-able multilayer classifier. Layer l produces representation h^(l);
/// the last layer's output is the logit vector.
struct BaseModel {
  std::vector<DenseLayer> layers;
  std::size_t class_count = 0;
  bool frozen = false;

  std::size_t input_dim() const { return layers.front().spec.in_dim; }
  std::size_t depth() const { return layers.size(); }

  void validate() const {
    require(!layers.empty(), "invalid_model", "model has no layers");
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const auto& layer = layers[l];
      require(layer.weight.rows == layer.spec.out_dim && layer.weight.cols == layer.spec.in_dim &&
                  layer.bias.size() == layer.spec.out_dim,
              "invalid_model", "layer " + std::to_string(l) + " storage does not match its spec");
      if (l > 0) {
        require(layers[l - 1].spec.out_dim == layer.spec.in_dim, "invalid_model",
                "layer " + std::to_string(l) + " input does not chain from the previous layer");
      }
    }
    require(layers.back().spec.out_dim == class_count, "invalid_model",
            "final layer width must equal the class count");
  }

  bool operator==(const BaseModel&) const = default;
};

struct ModelSpec {
  std::vector<std::size_t> hidden = {32, 32};
  Activation activation = Activation::tanh;
};

inline BaseModel make_model(std::size_t input_dim, std::size_t class_count, const ModelSpec& spec, Rng& rng) {
  require(input_dim >= 1 && class_count >= 2, "invalid_argument", "model needs >= 1 input and >= 2 classes");
  BaseModel model;
  model.class_count = class_count;
  std::size_t in = input_dim;
  for (std::size_t width : spec.hidden) {
    model.layers.push_back(make_dense_layer({in, width, spec.activation}, rng));
    in = width;
  }
  model.layers.push_back(make_dense_layer({in, class_count, Activation::identity}, rng));
  return model;
}

/// Per-layer caches of one forward pass.
struct ForwardTrace {
  std::vector<DenseCache> layers;

  const Vector& representation(std::size_t l) const { return layers.at(l).output; }
  const Vector& logits() const { return layers.back().output; }

  bool operator==(const ForwardTrace& other) const {
    if (layers.size() != other.layers.size()) return false;
    for (std::size_t l = 0; l < layers.size(); ++l) {
      if (layers[l].input != other.layers[l].input || layers[l].pre_activation != other.layers[l].pre_activation ||
          layers[l].output != other.layers[l].output) {
        return false;
      }
    }
    return true;
  }
};

inline ForwardTrace forward(const BaseModel& model, std::span<const double> x) {
  require(x.size() == model.input_dim(), "dimension_mismatch",
          "input has " + std::to_string(x.size()) + " features, model expects " +
              std::to_string(model.input_dim()));
  ForwardTrace trace;
  trace.layers.reserve(model.depth());
  std::span<const double> current = x;
  for (const auto& layer : model.layers) {
    trace.layers.push_back(dense_forward(layer, current));
    current = trace.layers.back().output;
  }
  return trace;
}

/// Index of the largest entry; ties resolve to the lowest index.
inline std::size_t argmax(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

inline std::size_t predict(const BaseModel& model, std::span<const double> x) {
  return argmax(forward(model, x).logits());
}

inline std::vector<std::size_t> predict_all(const BaseModel& model, const Dataset& ds,
                                            std::span<const std::size_t> rows) {
  std::vector<std::size_t> out;
  out.reserve(rows.size());
  for (std::size_t i : rows) out.push_back(predict(model, ds.row(i)));
  return out;
}

/// Backpropagates dL/dlogits through the whole model, accumulating into `tape`.
inline void backward(const BaseModel& model, const ForwardTrace& trace, std::span<const double> dlogits,
                     GradientTape& tape) {
  Vector upstream(dlogits.begin(), dlogits.end());
  for (std::size_t l = model.depth(); l-- > 0;) {
    upstream = dense_backward(model.layers[l], trace.layers[l], upstream, &tape[l]);
  }
}

/// Mean softmax cross-entropy over `rows`, with its gradient in `tape`.
inline double task_loss(const BaseModel& model, const Dataset& ds, std::span<const std::size_t> rows,
                        GradientTape* tape) {
  require(!rows.empty(), "empty_batch", "task loss over an empty batch");
  if (tape != nullptr) tape->zero();
  double total = 0.0;
  const double scale = 1.0 / static_cast<double>(rows.size());
  for (std::size_t i : rows) {
    const ForwardTrace trace = forward(model, ds.row(i));
    auto ce = stable_softmax_ce(trace.logits(), ds.labels[i]);
    total += ce.loss;
    if (tape != nullptr) {
      for (double& g : ce.gradient) g *= scale;
      backward(model, trace, ce.gradient, *tape);
    }
  }
  return total * scale;
}

inline double accuracy(const BaseModel& model, const Dataset& ds, std::span<const std::size_t> rows) {
  if (rows.empty()) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i : rows) correct += predict(model, ds.row(i)) == ds.labels[i] ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(rows.size());
}

struct TrainHyper {
  std::size_t epochs = 300;
  double learning_rate = 0.05;
  std::size_t batch_size = 64;
};

struct ErmResult {
  BaseModel model;
  std::size_t best_epoch = 0;  // 0 = initial weights
  double best_val_accuracy = 0.0;
  std::vector<double> epoch_losses;
};

/// Mini-batch gradient descent on mean cross-entropy over the train split.
/// Returns the weights from the epoch with the best validation accuracy
/// (strict improvements only; without a validation split, the last epoch).
inline ErmResult train_erm(const Dataset& ds, const ModelSpec& spec, const TrainHyper& hyper, std::uint64_t seed) {
  ds.validate();
  auto train = ds.indices(Split::train);
  const auto val = ds.indices(Split::val);
  require(!train.empty(), "empty_split", "train split is empty");
  require(hyper.batch_size >= 1, "invalid_config", "batch size must be >= 1");

  Rng rng(seed);
  ErmResult result;
  BaseModel model = make_model(ds.dim(), std::max<std::size_t>(ds.class_count(), 2), spec, rng);
  result.model = model;
  result.best_val_accuracy = val.empty() ? 0.0 : accuracy(model, ds, val);

  GradientTape tape(model.layers);
  for (std::size_t epoch = 1; epoch <= hyper.epochs; ++epoch) {
    rng.shuffle(train);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < train.size(); start += hyper.batch_size) {
      const std::size_t stop = std::min(train.size(), start + hyper.batch_size);
      const std::span<const std::size_t> batch(train.data() + start, stop - start);
      const std::string where = "ERM loss became non-finite at epoch " + std::to_string(epoch);
      double loss = 0.0;
      try {
        loss = task_loss(model, ds, batch, &tape);
      } catch (const Error& e) {
        if (e.code() == "non_finite") throw Error("diverged", where);
        throw;
      }
      require(std::isfinite(loss), "diverged", where);
      epoch_loss += loss * static_cast<double>(batch.size());
      for (std::size_t l = 0; l < model.depth(); ++l) sgd_step(model.layers[l], tape[l], hyper.learning_rate);
    }
    result.epoch_losses.push_back(epoch_loss / static_cast<double>(train.size()));
    if (val.empty()) {
      result.model = model;
      result.best_epoch = epoch;
      continue;
    }
    const double acc = accuracy(model, ds, val);
    if (acc > result.best_val_accuracy) {
      result.best_val_accuracy = acc;
      result.best_epoch = epoch;
      result.model = model;
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Parameter and FLOP accounting. One multiply-add counts as 2 FLOPs; bias
// additions and activations are not counted.

inline std::size_t dense_params(const LayerSpec& s) { return s.out_dim * s.in_dim + s.out_dim; }
inline std::size_t dense_flops(const LayerSpec& s) { return 2 * s.out_dim * s.in_dim; }

inline std::size_t count_params(const BaseModel& model) {
  std::size_t total = 0;
  for (const auto& l : model.layers) total += dense_params(l.spec);
  return total;
}

inline std::size_t count_flops(const BaseModel& model) {
  std::size_t total = 0;
  for (const auto& l : model.layers) total += dense_flops(l.spec);
  return total;
}

}  // namespace fairgate
