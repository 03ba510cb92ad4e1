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

#include <cstddef>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "fairgate/data.hpp"
#include "fairgate/detector.hpp"
#include "fairgate/error.hpp"
#include "fairgate/fairlora.hpp"
#include "fairgate/model.hpp"
#include "fairgate/numerics.hpp"
#include "fairgate/rng.hpp"

namespace fairgate {

/// Frozen class-conditional targets computed from the stage-1 model at one
/// layer: positives are majority-group class means, negatives are class
/// means over all groups.
struct TargetBank {
  std::size_t layer = 0;
  std::map<std::size_t, Vector> positive_targets;
  std::map<std::size_t, Vector> negative_targets;

  bool operator==(const TargetBank&) const = default;
};

namespace detail {

inline void mean_into(std::map<std::size_t, Vector>& sums, const std::map<std::size_t, std::size_t>& counts) {
  for (auto& [cls, sum] : sums) {
    const double inv = 1.0 / static_cast<double>(counts.at(cls));
    for (double& v : sum) v *= inv;
  }
}

}  // namespace detail

/// Builds the bank from training rows. Positives use rows whose `groups`
/// entry is majority; negatives use every training row. `groups` defaults to
/// the dataset's own sensitive column.
inline TargetBank build_target_bank(const BaseModel& model, const Dataset& ds, std::size_t layer,
                                    std::span<const Sensitive> groups = {}) {
  require(layer < model.depth(), "invalid_argument", "bank layer past the model depth");
  if (groups.empty()) groups = ds.sensitive;
  require(groups.size() == ds.size(), "dimension_mismatch", "one group label per sample required");
  TargetBank bank;
  bank.layer = layer;
  std::map<std::size_t, std::size_t> pos_counts, neg_counts;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (ds.split[i] != Split::train) continue;
    const ForwardTrace trace = forward(model, ds.row(i));
    const Vector& h = trace.representation(layer);
    const std::size_t y = ds.labels[i];
    auto accumulate = [&](std::map<std::size_t, Vector>& sums, std::map<std::size_t, std::size_t>& counts) {
      auto [it, inserted] = sums.try_emplace(y, Vector(h.size(), 0.0));
      for (std::size_t c = 0; c < h.size(); ++c) it->second[c] += h[c];
      ++counts[y];
    };
    accumulate(bank.negative_targets, neg_counts);
    if (groups[i] == Sensitive::majority) accumulate(bank.positive_targets, pos_counts);
  }
  for (const auto& [cls, count] : neg_counts) {
    require(pos_counts.contains(cls), "missing_majority",
            "class " + std::to_string(cls) + " has no majority-group training samples");
  }
  detail::mean_into(bank.positive_targets, pos_counts);
  detail::mean_into(bank.negative_targets, neg_counts);
  return bank;
}

struct LossWeights {
  double task = 1.0;         // weight of the task cross-entropy
  double detector = 1.0;     // lambda_D
  double contrastive = 1.0;  // lambda_C
  double margin = 0.5;
};

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

/// max(0, |z - t_pos|^2 - |z - t_neg|^2 + margin). When active the gradient
/// w.r.t. z is 2 (t_neg - t_pos); the z terms cancel.
inline LossAndGradient triplet_loss(std::span<const double> anchor, std::span<const double> positive,
                                    std::span<const double> negative, double margin) {
  require(anchor.size() == positive.size() && anchor.size() == negative.size(), "dimension_mismatch",
          "triplet vectors must share one width");
  require(margin > 0.0, "invalid_argument", "margin must be positive");
  LossAndGradient out;
  out.gradient.assign(anchor.size(), 0.0);
  const double hinge = squared_distance(anchor, positive) - squared_distance(anchor, negative) + margin;
  if (hinge <= 0.0) return out;
  out.loss = hinge;
  for (std::size_t i = 0; i < anchor.size(); ++i) out.gradient[i] = 2.0 * (negative[i] - positive[i]);
  return out;
}

enum class NegativeStrategy { hard, random };

inline std::string_view to_string(NegativeStrategy s) { return s == NegativeStrategy::hard ? "hard" : "random"; }

inline NegativeStrategy parse_negative_strategy(std::string_view name) {
  if (name == "hard") return NegativeStrategy::hard;
  if (name == "random") return NegativeStrategy::random;
  throw Error("invalid_config", "unknown negative strategy '" + std::string(name) + "'");
}

/// Class whose negative target serves the anchor. Hard: nearest class mean
/// among other classes (ties to the lowest index). Random: uniform among
/// other classes.
inline std::size_t select_negative(const TargetBank& bank, std::size_t anchor_class, std::span<const double> anchor,
                                   NegativeStrategy strategy, Rng* rng = nullptr) {
  std::vector<std::size_t> candidates;
  for (const auto& [cls, target] : bank.negative_targets) {
    if (cls != anchor_class) candidates.push_back(cls);
  }
  require(!candidates.empty(), "single_class", "negative selection needs at least two classes in the bank");
  if (strategy == NegativeStrategy::random) {
    require(rng != nullptr, "invalid_argument", "random negative selection needs a generator");
    return candidates[rng->below(candidates.size())];
  }
  std::size_t best = candidates.front();
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t cls : candidates) {
    const double d = squared_distance(anchor, bank.negative_targets.at(cls));
    if (d < best_d) {
      best_d = d;
      best = cls;
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Composite objective

/// How the per-sample trigger is decided.
enum class GateMode {
  ground_truth,  // open iff the sample's sensitive label is minority
  detector,      // open iff the detector score exceeds tau
  always,        // open for every sample
};

struct LossBatch {
  std::vector<std::span<const double>> inputs;
  std::vector<std::size_t> labels;
  std::vector<Sensitive> sensitive;  // may be unlabeled
};

struct LossContext {
  const BaseModel* model = nullptr;
  std::span<const AdapterUnit> units;
  std::span<const TargetBank> banks;  // aligned 1:1 with units
  const BiasDetector* detector = nullptr;
  ClassWeights detector_weights;
  GateMode gate = GateMode::detector;
  double tau = 0.5;
  NegativeStrategy negatives = NegativeStrategy::hard;
  Rng* rng = nullptr;
};

struct TotalLoss {
  double value = 0.0;
  double task = 0.0;
  double detector = 0.0;
  double contrastive = 0.0;
  std::size_t triggered = 0;
  std::vector<AdapterGradient> adapter_grads;
  std::optional<DetectorGradient> detector_grad;
};

/// L = w_task * mean CE(FairNet(x), y)
///   + lambda_D * weighted BCE of the detector over labeled samples
///   + lambda_C * sum_units mean triplet loss over the unit's triggered anchors.
/// The trigger is piecewise constant and carries no gradient. Gradients are
/// exact for the adapters (task and contrastive terms) and the detector
/// (detector term); base weights are never differentiated.
inline TotalLoss total_loss(const LossBatch& batch, const LossContext& ctx, const LossWeights& w,
                            bool want_gradients = true) {
  const std::size_t n = batch.inputs.size();
  require(n > 0, "empty_batch", "total loss over an empty batch");
  require(ctx.model != nullptr, "invalid_argument", "loss context has no model");
  require(ctx.banks.size() == ctx.units.size(), "dimension_mismatch", "one target bank per adapter unit required");
  const BaseModel& model = *ctx.model;
  require(ctx.gate != GateMode::detector || ctx.detector != nullptr, "missing_artifact",
          "detector gating requested without a detector");

  TotalLoss out;
  if (want_gradients) {
    out.adapter_grads = zero_adapter_gradients(ctx.units);
    if (ctx.detector != nullptr) out.detector_grad = DetectorGradient::zeros_like(*ctx.detector);
  }
  const double inv_n = 1.0 / static_cast<double>(n);

  // Detector term and gates share one base forward pass per sample.
  std::vector<bool> fire(n, false);
  std::size_t labeled = 0;
  for (std::size_t i = 0; i < n; ++i) labeled += is_labeled(batch.sensitive[i]) ? 1 : 0;
  for (std::size_t i = 0; i < n; ++i) {
    switch (ctx.gate) {
      case GateMode::always: fire[i] = true; break;
      case GateMode::ground_truth: fire[i] = batch.sensitive[i] == Sensitive::minority; break;
      case GateMode::detector: break;
    }
    if (ctx.detector == nullptr) continue;
    const bool needs_score = ctx.gate == GateMode::detector;
    const bool needs_bce = w.detector != 0.0 && is_labeled(batch.sensitive[i]);
    if (!needs_score && !needs_bce) continue;
    const ForwardTrace base = forward(model, batch.inputs[i]);
    const Vector& h = base.representation(ctx.detector->layer);
    const DetectorTrace dt = detector_forward(*ctx.detector, std::span<const Vector>(&h, 1));
    if (needs_score) fire[i] = dt.score() > ctx.tau;
    if (needs_bce) {
      const int target = group_index(batch.sensitive[i]);
      const auto bce = bce_with_logit(dt.logit(), static_cast<double>(target));
      const double weight = ctx.detector_weights.of(target) / static_cast<double>(labeled);
      out.detector += weight * bce.loss;
      if (want_gradients) {
        detector_backward(*ctx.detector, std::span<const Vector>(&h, 1), dt, w.detector * weight * bce.gradient[0],
                          *out.detector_grad);
      }
    }
  }

  // Per-unit trigger counts for the contrastive mean.
  std::vector<std::size_t> unit_anchors(ctx.units.size(), 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (fire[i]) {
      ++out.triggered;
      for (std::size_t u = 0; u < ctx.units.size(); ++u) ++unit_anchors[u];
    }
  }

  for (std::size_t i = 0; i < n; ++i) {
    const std::vector<bool> open(ctx.units.size(), fire[i]);
    std::vector<AdapterCache> caches;
    const ForwardTrace trace = conditional_forward(model, ctx.units, batch.inputs[i], open, &caches);

    Vector dlogits;
    if (w.task != 0.0) {
      auto ce = stable_softmax_ce(trace.logits(), batch.labels[i]);
      out.task += inv_n * ce.loss;
      for (double& g : ce.gradient) g *= w.task * inv_n;
      dlogits = std::move(ce.gradient);
    }

    std::map<std::size_t, Vector> injected;
    if (fire[i] && w.contrastive != 0.0) {
      for (std::size_t u = 0; u < ctx.units.size(); ++u) {
        const TargetBank& bank = ctx.banks[u];
        const Vector& z = trace.representation(bank.layer);
        const std::size_t y = batch.labels[i];
        const auto pos = bank.positive_targets.find(y);
        require(pos != bank.positive_targets.end(), "missing_target",
                "no positive target for class " + std::to_string(y));
        const std::size_t neg_class = select_negative(bank, y, z, ctx.negatives, ctx.rng);
        const auto trip = triplet_loss(z, pos->second, bank.negative_targets.at(neg_class), w.margin);
        const double scale = 1.0 / static_cast<double>(unit_anchors[u]);
        out.contrastive += scale * trip.loss;
        auto [it, inserted] = injected.try_emplace(bank.layer, Vector(z.size(), 0.0));
        for (std::size_t c = 0; c < z.size(); ++c) it->second[c] += w.contrastive * scale * trip.gradient[c];
      }
    }

    if (want_gradients && (fire[i]) && (!dlogits.empty() || !injected.empty())) {
      conditional_backward(model, ctx.units, open, trace, caches, dlogits, injected, &out.adapter_grads, nullptr);
    }
  }

  out.value = w.task * out.task + w.detector * out.detector + w.contrastive * out.contrastive;
  return out;
}

}  // namespace fairgate
