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

// Group performance and fairness metrics for a binary sensitive attribute.
// Rates that have no support (e.g. a group without positives) come back as
// std::nullopt, never as a silent zero. Values are fractions in [0, 1].

#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>

#include "fairgate/data.hpp"
#include "fairgate/error.hpp"

namespace fairgate {

using MaybeRate = std::optional<double>;

struct ConfusionCounts {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;

  std::size_t total() const { return tp + fp + tn + fn; }
  MaybeRate tpr() const { return tp + fn == 0 ? MaybeRate{} : static_cast<double>(tp) / static_cast<double>(tp + fn); }
  MaybeRate fpr() const { return fp + tn == 0 ? MaybeRate{} : static_cast<double>(fp) / static_cast<double>(fp + tn); }
  MaybeRate positive_rate() const {
    return total() == 0 ? MaybeRate{} : static_cast<double>(tp + fp) / static_cast<double>(total());
  }
};

/// One-vs-rest confusion per group; `positive_class` is the positive label.
struct GroupConfusion {
  std::array<ConfusionCounts, 2> groups;
};

namespace detail {

inline void check_lengths(std::size_t a, std::size_t b, std::size_t c) {
  require(a == b && b == c, "dimension_mismatch", "predictions, labels and groups must have equal length");
}

inline MaybeRate abs_gap(const MaybeRate& a, const MaybeRate& b) {
  if (!a || !b) return {};
  return std::abs(*a - *b);
}

}  // namespace detail

inline GroupConfusion group_confusion(std::span<const std::size_t> preds, std::span<const std::size_t> labels,
                                      std::span<const Sensitive> groups, std::size_t positive_class = 1) {
  detail::check_lengths(preds.size(), labels.size(), groups.size());
  GroupConfusion gc;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (!is_labeled(groups[i])) continue;
    auto& c = gc.groups[group_index(groups[i])];
    const bool predicted = preds[i] == positive_class;
    const bool actual = labels[i] == positive_class;
    if (predicted && actual) ++c.tp;
    else if (predicted) ++c.fp;
    else if (actual) ++c.fn;
    else ++c.tn;
  }
  return gc;
}

/// P(correct | S = g) for g = 0, 1.
inline std::array<double, 2> group_accuracy(std::span<const std::size_t> preds, std::span<const std::size_t> labels,
                                            std::span<const Sensitive> groups) {
  detail::check_lengths(preds.size(), labels.size(), groups.size());
  std::array<std::size_t, 2> correct{}, total{};
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (!is_labeled(groups[i])) continue;
    const int g = group_index(groups[i]);
    ++total[g];
    correct[g] += preds[i] == labels[i] ? 1 : 0;
  }
  require(total[0] > 0 && total[1] > 0, "empty_group", "group accuracy needs samples from both groups");
  return {static_cast<double>(correct[0]) / static_cast<double>(total[0]),
          static_cast<double>(correct[1]) / static_cast<double>(total[1])};
}

inline double wga(std::span<const std::size_t> preds, std::span<const std::size_t> labels,
                  std::span<const Sensitive> groups) {
  const auto acc = group_accuracy(preds, labels, groups);
  return std::min(acc[0], acc[1]);
}

inline double overall_accuracy(std::span<const std::size_t> preds, std::span<const std::size_t> labels) {
  require(preds.size() == labels.size() && !preds.empty(), "dimension_mismatch", "accuracy needs matching, non-empty inputs");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) correct += preds[i] == labels[i] ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(preds.size());
}

/// 1/2 (|TPR_0 - TPR_1| + |FPR_0 - FPR_1|).
inline MaybeRate eod(std::span<const std::size_t> preds, std::span<const std::size_t> labels,
                     std::span<const Sensitive> groups, std::size_t positive_class = 1) {
  const auto gc = group_confusion(preds, labels, groups, positive_class);
  const auto dtpr = detail::abs_gap(gc.groups[0].tpr(), gc.groups[1].tpr());
  const auto dfpr = detail::abs_gap(gc.groups[0].fpr(), gc.groups[1].fpr());
  if (!dtpr || !dfpr) return {};
  return 0.5 * (*dtpr + *dfpr);
}

/// |P(Yhat = 1 | S = 0) - P(Yhat = 1 | S = 1)|.
inline MaybeRate dp(std::span<const std::size_t> preds, std::span<const Sensitive> groups,
                    std::size_t positive_class = 1) {
  require(preds.size() == groups.size(), "dimension_mismatch", "predictions and groups must have equal length");
  std::array<std::size_t, 2> positive{}, total{};
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (!is_labeled(groups[i])) continue;
    const int g = group_index(groups[i]);
    ++total[g];
    positive[g] += preds[i] == positive_class ? 1 : 0;
  }
  if (total[0] == 0 || total[1] == 0) return {};
  return std::abs(static_cast<double>(positive[0]) / static_cast<double>(total[0]) -
                  static_cast<double>(positive[1]) / static_cast<double>(total[1]));
}

/// |TPR_0 - TPR_1|.
inline MaybeRate eop(std::span<const std::size_t> preds, std::span<const std::size_t> labels,
                     std::span<const Sensitive> groups, std::size_t positive_class = 1) {
  const auto gc = group_confusion(preds, labels, groups, positive_class);
  return detail::abs_gap(gc.groups[0].tpr(), gc.groups[1].tpr());
}

struct FairnessReport {
  double acc = 0.0;
  std::array<double, 2> group_acc{};
  double wga = 0.0;
  MaybeRate eod;
  MaybeRate dp;
  MaybeRate eop;
};

inline FairnessReport evaluate_fairness(std::span<const std::size_t> preds, std::span<const std::size_t> labels,
                                        std::span<const Sensitive> groups, std::size_t positive_class = 1) {
  FairnessReport r;
  r.acc = overall_accuracy(preds, labels);
  r.group_acc = group_accuracy(preds, labels, groups);
  r.wga = std::min(r.group_acc[0], r.group_acc[1]);
  r.eod = eod(preds, labels, groups, positive_class);
  r.dp = dp(preds, groups, positive_class);
  r.eop = eop(preds, labels, groups, positive_class);
  return r;
}

}  // namespace fairgate
