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

// Bias detector: optional attention pooling over a sequence of hidden
// vectors, then a one-hidden-layer scorer with a sigmoid output giving the
// probability that a sample belongs to the minority group. Also hosts the
// unsupervised route (exact LOF + top-q pseudo-labels) and rate evaluation.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fairgate/data.hpp"
#include "fairgate/error.hpp"
#include "fairgate/numerics.hpp"
#include "fairgate/rng.hpp"

namespace fairgate {

enum class Pooling { none, attention };

inline std::string_view to_string(Pooling p) { return p == Pooling::attention ? "attention" : "none"; }

inline Pooling parse_pooling(std::string_view name) {
  if (name == "none") return Pooling::none;
  if (name == "attention") return Pooling::attention;
  throw Error("invalid_config", "unknown pooling '" + std::string(name) + "'");
}

/// score_i = query . tanh(proj h_i + bias); weights = softmax(score).
struct AttentionPooling {
  Matrix proj;   // attn_dim x input_dim
  Vector bias;   // attn_dim
  Vector query;  // attn_dim

  bool operator==(const AttentionPooling&) const = default;
};

struct PoolResult {
  Vector pooled;
  Vector weights;             // alpha_i, sums to 1
  std::vector<Vector> hidden;  // tanh(proj h_i + bias), kept for backward
};

inline PoolResult attention_pool(std::span<const Vector> tokens, const AttentionPooling& params) {
  require(!tokens.empty(), "empty_input", "attention pooling over an empty sequence");
  const std::size_t dim = tokens.front().size();
  PoolResult out;
  Vector scores(tokens.size());
  out.hidden.reserve(tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    require(tokens[i].size() == dim, "dimension_mismatch", "attention tokens must share one width");
    Vector hidden = matvec(params.proj, tokens[i]);
    double s = 0.0;
    for (std::size_t a = 0; a < hidden.size(); ++a) {
      hidden[a] = std::tanh(hidden[a] + params.bias[a]);
      s += params.query[a] * hidden[a];
    }
    scores[i] = s;
    out.hidden.push_back(std::move(hidden));
  }
  out.weights = softmax(scores);
  out.pooled.assign(dim, 0.0);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    for (std::size_t c = 0; c < dim; ++c) out.pooled[c] += out.weights[i] * tokens[i][c];
  }
  return out;
}

struct BiasDetector {
  int attribute_id = 0;
  std::size_t layer = 1;  // base-model representation the detector reads
  Pooling pooling = Pooling::none;
  AttentionPooling attention;
  DenseLayer hidden;  // input -> hidden units, relu
  DenseLayer output;  // hidden -> 1, identity (sigmoid applied in score)
  double threshold = 0.5;

  std::size_t input_dim() const { return hidden.spec.in_dim; }

  std::size_t param_count() const {
    std::size_t n = dense_params(hidden.spec) + dense_params(output.spec);
    if (pooling == Pooling::attention) {
      n += attention.proj.values.size() + attention.bias.size() + attention.query.size();
    }
    return n;
  }

  /// Multiply-adds of one scoring pass over a single vector (2 FLOPs each).
  std::size_t flops_per_vector() const {
    std::size_t f = 2 * hidden.spec.in_dim * hidden.spec.out_dim + 2 * hidden.spec.out_dim;
    if (pooling == Pooling::attention) {
      f += 2 * attention.proj.rows * attention.proj.cols + 2 * attention.query.size() + 2 * input_dim();
    }
    return f;
  }

  bool operator==(const BiasDetector&) const = default;

 private:
  static std::size_t dense_params(const LayerSpec& s) { return s.out_dim * s.in_dim + s.out_dim; }
};

struct DetectorSpec {
  std::size_t layer = 1;
  std::size_t hidden_units = 16;
  Pooling pooling = Pooling::none;
  std::size_t attention_dim = 8;
  double threshold = 0.5;
};

inline BiasDetector make_detector(std::size_t input_dim, const DetectorSpec& spec, int attribute_id, Rng& rng) {
  require(spec.threshold >= 0.0 && spec.threshold <= 1.0, "invalid_config", "threshold must lie in [0, 1]");
  BiasDetector d;
  d.attribute_id = attribute_id;
  d.layer = spec.layer;
  d.pooling = spec.pooling;
  d.threshold = spec.threshold;
  if (spec.pooling == Pooling::attention) {
    d.attention.proj = Matrix(spec.attention_dim, input_dim);
    glorot_uniform(d.attention.proj, rng);
    d.attention.bias.assign(spec.attention_dim, 0.0);
    d.attention.query.resize(spec.attention_dim);
    for (double& v : d.attention.query) v = rng.uniform(-0.5, 0.5);
  }
  d.hidden = make_dense_layer({input_dim, spec.hidden_units, Activation::relu}, rng);
  d.output = make_dense_layer({spec.hidden_units, 1, Activation::identity}, rng);
  return d;
}

struct DetectorTrace {
  std::optional<PoolResult> pool;
  DenseCache hidden;
  DenseCache output;

  double logit() const { return output.output[0]; }
  double score() const { return stable_sigmoid(logit()); }
};

inline DetectorTrace detector_forward(const BiasDetector& d, std::span<const Vector> tokens) {
  require(!tokens.empty(), "empty_input", "detector input is empty");
  DetectorTrace t;
  std::span<const double> input;
  if (d.pooling == Pooling::attention) {
    t.pool = attention_pool(tokens, d.attention);
    input = t.pool->pooled;
  } else {
    require(tokens.size() == 1, "dimension_mismatch", "detector without pooling takes a single vector");
    input = tokens.front();
  }
  require(input.size() == d.input_dim(), "dimension_mismatch",
          "detector expects width " + std::to_string(d.input_dim()) + ", got " + std::to_string(input.size()));
  t.hidden = dense_forward(d.hidden, input);
  t.output = dense_forward(d.output, t.hidden.output);
  return t;
}

/// p_s in (0, 1) for one representation vector.
inline double score(const BiasDetector& d, std::span<const double> h) {
  const Vector v(h.begin(), h.end());
  return detector_forward(d, std::span<const Vector>(&v, 1)).score();
}

inline double score(const BiasDetector& d, std::span<const Vector> tokens) {
  return detector_forward(d, tokens).score();
}

struct DetectorGradient {
  AttentionPooling attention;
  LayerGradient hidden;
  LayerGradient output;

  static DetectorGradient zeros_like(const BiasDetector& d) {
    DetectorGradient g;
    g.attention.proj = Matrix(d.attention.proj.rows, d.attention.proj.cols);
    g.attention.bias.assign(d.attention.bias.size(), 0.0);
    g.attention.query.assign(d.attention.query.size(), 0.0);
    g.hidden = {Matrix(d.hidden.weight.rows, d.hidden.weight.cols), Vector(d.hidden.bias.size(), 0.0)};
    g.output = {Matrix(d.output.weight.rows, d.output.weight.cols), Vector(d.output.bias.size(), 0.0)};
    return g;
  }
};

/// Accumulates d(loss)/d(params) given d(loss)/d(logit).
inline void detector_backward(const BiasDetector& d, std::span<const Vector> tokens, const DetectorTrace& t,
                              double dlogit, DetectorGradient& g) {
  const Vector up = {dlogit};
  const Vector dhidden = dense_backward(d.output, t.output, up, &g.output);
  const Vector dinput = dense_backward(d.hidden, t.hidden, dhidden, &g.hidden);
  if (d.pooling != Pooling::attention) return;

  const PoolResult& pool = *t.pool;
  const std::size_t n = tokens.size();
  // d/d alpha_i = dinput . h_i ; softmax Jacobian gives d/d score_i.
  Vector dalpha(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < dinput.size(); ++c) dalpha[i] += dinput[c] * tokens[i][c];
  }
  double mean_dalpha = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean_dalpha += pool.weights[i] * dalpha[i];
  for (std::size_t i = 0; i < n; ++i) {
    const double dscore = pool.weights[i] * (dalpha[i] - mean_dalpha);
    const Vector& hid = pool.hidden[i];
    for (std::size_t a = 0; a < hid.size(); ++a) {
      g.attention.query[a] += dscore * hid[a];
      const double du = dscore * d.attention.query[a] * (1.0 - hid[a] * hid[a]);
      g.attention.bias[a] += du;
      for (std::size_t c = 0; c < tokens[i].size(); ++c) g.attention.proj(a, c) += du * tokens[i][c];
    }
  }
}

/// One labeled detector example: a sequence (length 1 without pooling).
struct DetectorExample {
  std::span<const Vector> tokens;
  int target = 0;  // 1 = minority
};

/// Per-class BCE weights.
struct ClassWeights {
  double majority = 1.0;
  double minority = 1.0;

  double of(int target) const { return target == 1 ? minority : majority; }
};

/// n / (2 n_c): balanced weights whose mean over the sample is 1.
inline ClassWeights inverse_frequency_weights(std::span<const int> targets) {
  std::size_t ones = 0;
  for (int t : targets) ones += t == 1 ? 1 : 0;
  const std::size_t zeros = targets.size() - ones;
  require(ones > 0 && zeros > 0, "single_class", "detector labels contain a single class");
  const double n = static_cast<double>(targets.size());
  return {n / (2.0 * static_cast<double>(zeros)), n / (2.0 * static_cast<double>(ones))};
}

/// (1/n) sum_i w_{s_i} BCE(logit_i, s_i), optionally with its gradient.
inline double detector_loss(const BiasDetector& d, std::span<const DetectorExample> batch, const ClassWeights& w,
                            DetectorGradient* grad) {
  require(!batch.empty(), "empty_batch", "detector loss over an empty batch");
  const double scale = 1.0 / static_cast<double>(batch.size());
  double total = 0.0;
  for (const auto& ex : batch) {
    const DetectorTrace t = detector_forward(d, ex.tokens);
    const auto bce = bce_with_logit(t.logit(), static_cast<double>(ex.target));
    const double weight = w.of(ex.target);
    total += weight * bce.loss;
    if (grad != nullptr) detector_backward(d, ex.tokens, t, scale * weight * bce.gradient[0], *grad);
  }
  return total * scale;
}

inline void sgd_step(BiasDetector& d, const DetectorGradient& g, double scale) {
  sgd_step(d.hidden, g.hidden, scale);
  sgd_step(d.output, g.output, scale);
  if (d.pooling == Pooling::attention) {
    for (std::size_t i = 0; i < d.attention.proj.values.size(); ++i) {
      d.attention.proj.values[i] -= scale * g.attention.proj.values[i];
    }
    for (std::size_t i = 0; i < d.attention.bias.size(); ++i) d.attention.bias[i] -= scale * g.attention.bias[i];
    for (std::size_t i = 0; i < d.attention.query.size(); ++i) d.attention.query[i] -= scale * g.attention.query[i];
  }
}

struct DetectorHyper {
  std::size_t epochs = 60;
  double learning_rate = 0.1;
  std::size_t batch_size = 64;
  bool balance_classes = true;  // inverse-frequency weights; otherwise (1, 1)
};

/// Weighted-BCE training over labeled examples only. `labels` is aligned
/// with `embeddings`; unlabeled entries are skipped.
inline BiasDetector train_detector(std::span<const std::vector<Vector>> embeddings,
                                   std::span<const Sensitive> labels, const DetectorSpec& spec,
                                   const DetectorHyper& hyper, int attribute_id, std::uint64_t seed) {
  require(embeddings.size() == labels.size(), "dimension_mismatch", "one sensitive label per embedding required");
  std::vector<DetectorExample> examples;
  std::vector<int> targets;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!is_labeled(labels[i])) continue;
    examples.push_back({embeddings[i], group_index(labels[i])});
    targets.push_back(group_index(labels[i]));
  }
  require(!examples.empty(), "single_class", "no labeled samples for detector training");
  const ClassWeights weights = hyper.balance_classes ? inverse_frequency_weights(targets) : [&] {
    inverse_frequency_weights(targets);  // still rejects single-class input
    return ClassWeights{};
  }();

  Rng rng(seed);
  const std::size_t width = embeddings.front().front().size();
  BiasDetector d = make_detector(width, spec, attribute_id, rng);
  DetectorGradient grad = DetectorGradient::zeros_like(d);
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<DetectorExample> batch;
  for (std::size_t epoch = 0; epoch < hyper.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += hyper.batch_size) {
      const std::size_t stop = std::min(order.size(), start + hyper.batch_size);
      batch.clear();
      for (std::size_t r = start; r < stop; ++r) batch.push_back(examples[order[r]]);
      grad = DetectorGradient::zeros_like(d);
      const double loss = detector_loss(d, batch, weights, &grad);
      require(std::isfinite(loss), "diverged", "detector loss became non-finite at epoch " + std::to_string(epoch));
      sgd_step(d, grad, hyper.learning_rate);
    }
  }
  return d;
}

/// Convenience overload for single-vector representations.
inline BiasDetector train_detector(std::span<const Vector> embeddings, std::span<const Sensitive> labels,
                                   const DetectorSpec& spec, const DetectorHyper& hyper, int attribute_id,
                                   std::uint64_t seed) {
  std::vector<std::vector<Vector>> wrapped;
  wrapped.reserve(embeddings.size());
  for (const auto& e : embeddings) wrapped.push_back({e});
  return train_detector(std::span<const std::vector<Vector>>(wrapped), labels, spec, hyper, attribute_id, seed);
}

// ---------------------------------------------------------------------------
// Local outlier factor (exact, Euclidean)

/// Classic LOF. The k-neighbourhood of a point holds every other point within
/// its k-distance (so ties can make it larger than k). Zero reachability sums
/// (duplicate points) are replaced by 1e-12.
inline Vector lof_scores(std::span<const Vector> points, std::size_t k) {
  const std::size_t n = points.size();
  require(k >= 1 && n > k, "invalid_argument",
          "LOF needs n > k >= 1 (n = " + std::to_string(n) + ", k = " + std::to_string(k) + ")");
  const std::size_t dim = points.front().size();
  for (const auto& p : points) require(p.size() == dim, "dimension_mismatch", "LOF points must share one width");

  auto distance = [&](std::size_t a, std::size_t b) {
    double s = 0.0;
    for (std::size_t c = 0; c < dim; ++c) {
      const double diff = points[a][c] - points[b][c];
      s += diff * diff;
    }
    return std::sqrt(s);
  };

  Vector k_distance(n);
  std::vector<std::vector<std::pair<std::size_t, double>>> neighbours(n);
  Vector row(n);
  Vector scratch;
  for (std::size_t a = 0; a < n; ++a) {
    scratch.clear();
    for (std::size_t b = 0; b < n; ++b) {
      if (b == a) continue;
      row[b] = distance(a, b);
      scratch.push_back(row[b]);
    }
    std::nth_element(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(k - 1), scratch.end());
    k_distance[a] = scratch[k - 1];
    for (std::size_t b = 0; b < n; ++b) {
      if (b != a && row[b] <= k_distance[a]) neighbours[a].emplace_back(b, row[b]);
    }
  }

  Vector lrd(n);
  for (std::size_t a = 0; a < n; ++a) {
    double sum = 0.0;
    for (const auto& [b, d] : neighbours[a]) sum += std::max(k_distance[b], d);
    if (sum == 0.0) sum = 1e-12;
    lrd[a] = static_cast<double>(neighbours[a].size()) / sum;
  }

  Vector lof(n);
  for (std::size_t a = 0; a < n; ++a) {
    double sum = 0.0;
    for (const auto& nb : neighbours[a]) sum += lrd[nb.first];
    lof[a] = sum / static_cast<double>(neighbours[a].size()) / lrd[a];
  }
  return lof;
}

/// Flags the ceil(q n) highest scores as minority; equal scores keep the lower
/// sample index first.
inline std::vector<Sensitive> pseudo_label(std::span<const double> scores, double contamination) {
  require(contamination > 0.0 && contamination < 1.0, "invalid_argument", "contamination must lie in (0, 1)");
  const std::size_t n = scores.size();
  const auto flagged = static_cast<std::size_t>(std::ceil(contamination * static_cast<double>(n)));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::vector<Sensitive> out(n, Sensitive::majority);
  for (std::size_t r = 0; r < std::min(flagged, n); ++r) out[order[r]] = Sensitive::minority;
  return out;
}

// ---------------------------------------------------------------------------
// Rates

struct DetectorRates {
  double tpr = 0.0;
  double fpr = 0.0;
  std::optional<double> ratio;  // empty when fpr == 0
};

/// Empirical TPR/FPR of the rule `score > tau` against the true groups.
inline DetectorRates evaluate_rates(std::span<const double> scores, std::span<const Sensitive> truth, double tau) {
  require(scores.size() == truth.size(), "dimension_mismatch", "one score per sample required");
  std::size_t pos = 0, neg = 0, tp = 0, fp = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!is_labeled(truth[i])) continue;
    const bool fired = scores[i] > tau;
    if (truth[i] == Sensitive::minority) {
      ++pos;
      tp += fired ? 1 : 0;
    } else {
      ++neg;
      fp += fired ? 1 : 0;
    }
  }
  require(pos > 0 && neg > 0, "empty_group", "both groups must be present to evaluate detector rates");
  DetectorRates r;
  r.tpr = static_cast<double>(tp) / static_cast<double>(pos);
  r.fpr = static_cast<double>(fp) / static_cast<double>(neg);
  if (fp > 0) r.ratio = r.tpr / r.fpr;
  return r;
}

}  // namespace fairgate
