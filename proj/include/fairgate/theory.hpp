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

// Closed-form performance of a detector-gated correction and a Monte Carlo
// check of those closed forms.
//
// Notation: G1 is the majority group (S = 0), G2 the minority (S = 1) with
// P(S = 1) = p. "base" is the uncorrected model, "lora" the correction
// applied unconditionally, and the gate fires with probability TPR on G2 and
// FPR on G1.

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>

#include "fairgate/error.hpp"
#include "fairgate/rng.hpp"

namespace fairgate {

struct TheoryInputs {
  double p = 0.1;
  std::array<double, 2> perf_base{};  // (G1, G2)
  std::array<double, 2> perf_lora{};  // (G1, G2)
  double tpr = 0.0;
  double fpr = 0.0;

  void validate() const {
    require(p > 0.0 && p < 1.0, "invalid_argument", "p must lie in (0, 1)");
    for (double v : {perf_base[0], perf_base[1], perf_lora[0], perf_lora[1], tpr, fpr}) {
      require(v >= 0.0 && v <= 1.0, "invalid_argument", "theory probabilities must lie in [0, 1]");
    }
  }
};

/// Gated performance per group:
///   G1 = (1 - FPR) base_G1 + FPR lora_G1
///   G2 = TPR lora_G2 + (1 - TPR) base_G2
inline std::array<double, 2> predicted_group_perf(const TheoryInputs& in) {
  in.validate();
  return {(1.0 - in.fpr) * in.perf_base[0] + in.fpr * in.perf_lora[0],
          in.tpr * in.perf_lora[1] + (1.0 - in.tpr) * in.perf_base[1]};
}

/// Change in overall accuracy:
///   (1 - p) FPR (lora_G1 - base_G1) + p TPR (lora_G2 - base_G2)
inline double delta_p(const TheoryInputs& in) {
  in.validate();
  return (1.0 - in.p) * in.fpr * (in.perf_lora[0] - in.perf_base[0]) +
         in.p * in.tpr * (in.perf_lora[1] - in.perf_base[1]);
}

enum class ConditionStatus { holds, fails, holds_trivially, vacuous };

inline const char* to_string(ConditionStatus s) {
  switch (s) {
    case ConditionStatus::holds: return "holds";
    case ConditionStatus::fails: return "fails";
    case ConditionStatus::holds_trivially: return "holds_trivially";
    case ConditionStatus::vacuous: return "vacuous";
  }
  return "vacuous";
}

struct ConditionResult {
  std::optional<double> rhs;    // empty when vacuous
  std::optional<double> ratio;  // TPR / FPR, empty when FPR = 0
  ConditionStatus status = ConditionStatus::vacuous;
  std::string reason;
};

/// Non-negative overall change requires
///   TPR / FPR >= ((1 - p) / p) (base_G1 - lora_G1) / (lora_G2 - base_G2),
/// valid when the correction helps G2 and FPR > 0.
inline ConditionResult preservation_condition(const TheoryInputs& in) {
  in.validate();
  ConditionResult r;
  const double gain_g2 = in.perf_lora[1] - in.perf_base[1];
  if (in.fpr > 0.0) r.ratio = in.tpr / in.fpr;
  if (!(gain_g2 > 0.0)) {
    r.reason = "correction does not improve the minority group";
    return r;
  }
  if (!(in.fpr > 0.0)) {
    r.reason = "FPR is zero; the gate never fires on the majority group";
    return r;
  }
  r.rhs = ((1.0 - in.p) / in.p) * (in.perf_base[0] - in.perf_lora[0]) / gain_g2;
  if (*r.rhs <= 0.0) {
    r.status = ConditionStatus::holds_trivially;
    r.reason = "correction does not hurt the majority group";
  } else {
    r.status = *r.ratio >= *r.rhs ? ConditionStatus::holds : ConditionStatus::fails;
  }
  return r;
}

struct MonteCarloEstimate {
  std::array<double, 2> group_perf{};  // empirical gated accuracy (G1, G2)
  std::array<double, 2> group_se{};
  double delta_p = 0.0;
  double delta_p_se = 0.0;
  std::array<std::size_t, 2> group_counts{};
  std::size_t samples = 0;
};

/// Simulates individuals: group ~ Bernoulli(p); gate ~ Bernoulli(TPR or FPR);
/// base correctness ~ Bernoulli(base_G). When the gate fires, gated
/// correctness is an independent Bernoulli(lora_G) draw, otherwise it equals
/// the base outcome. The overall change is estimated per group and weighted by
/// the true p, so degenerate probabilities reproduce the closed form exactly.
inline MonteCarloEstimate monte_carlo_validate(const TheoryInputs& in, std::size_t n, std::uint64_t seed) {
  in.validate();
  require(n >= 1, "invalid_argument", "Monte Carlo needs at least one sample");
  Rng rng(seed);
  std::array<double, 2> gated_sum{}, diff_sum{}, diff_sq{};
  std::array<std::size_t, 2> count{};
  for (std::size_t i = 0; i < n; ++i) {
    const int g = rng.bernoulli(in.p) ? 1 : 0;
    const bool fires = rng.bernoulli(g == 1 ? in.tpr : in.fpr);
    const bool base_ok = rng.bernoulli(in.perf_base[g]);
    const bool gated_ok = fires ? rng.bernoulli(in.perf_lora[g]) : base_ok;
    const double diff = static_cast<double>(gated_ok) - static_cast<double>(base_ok);
    ++count[g];
    gated_sum[g] += gated_ok ? 1.0 : 0.0;
    diff_sum[g] += diff;
    diff_sq[g] += diff * diff;
  }
  MonteCarloEstimate est;
  est.samples = n;
  est.group_counts = count;
  std::array<double, 2> weight = {1.0 - in.p, in.p};
  double var = 0.0;
  for (int g = 0; g < 2; ++g) {
    if (count[g] == 0) continue;
    const double m = static_cast<double>(count[g]);
    const double acc = gated_sum[g] / m;
    est.group_perf[g] = acc;
    est.group_se[g] = std::sqrt(acc * (1.0 - acc) / m);
    const double mean_diff = diff_sum[g] / m;
    const double var_diff = std::max(0.0, diff_sq[g] / m - mean_diff * mean_diff);
    est.delta_p += weight[g] * mean_diff;
    var += weight[g] * weight[g] * var_diff / m;
  }
  est.delta_p_se = std::sqrt(var);
  return est;
}

}  // namespace fairgate
