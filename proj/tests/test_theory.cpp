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

#include <gtest/gtest.h>

#include <cmath>

#include "fairgate/rng.hpp"
#include "fairgate/theory.hpp"

namespace fairgate {
namespace {

TheoryInputs worked() {
  TheoryInputs in;
  in.p = 0.1;
  in.perf_base = {0.90, 0.70};
  in.perf_lora = {0.88, 0.80};
  in.tpr = 0.9;
  in.fpr = 0.1;
  return in;
}

TheoryInputs random_inputs(Rng& rng) {
  TheoryInputs in;
  in.p = rng.uniform(0.01, 0.99);
  in.perf_base = {rng.uniform(), rng.uniform()};
  in.perf_lora = {rng.uniform(), rng.uniform()};
  in.tpr = rng.uniform();
  in.fpr = rng.uniform();
  return in;
}

TEST(Theory, GatedGroupPerformanceHandValue) {
  const auto g = predicted_group_perf(worked());
  EXPECT_NEAR(g[0], 0.898, 1e-12);
  EXPECT_NEAR(g[1], 0.9 * 0.8 + 0.1 * 0.7, 1e-12);
}

TEST(Theory, PerfectAndSilentDetectors) {
  auto in = worked();
  in.tpr = 1.0;
  in.fpr = 0.0;
  EXPECT_EQ(predicted_group_perf(in), (std::array<double, 2>{0.90, 0.80}));
  in.tpr = 0.0;
  EXPECT_EQ(predicted_group_perf(in), (std::array<double, 2>{0.90, 0.70}));
  EXPECT_EQ(delta_p(in), 0.0);
}

TEST(Theory, DeltaPHandValue) { EXPECT_NEAR(delta_p(worked()), 0.0072, 1e-12); }

TEST(Theory, IdenticalCorrectionChangesNothing) {
  auto in = worked();
  in.perf_lora = in.perf_base;
  EXPECT_EQ(delta_p(in), 0.0);
}

TEST(Theory, ConditionHandValue) {
  auto in = worked();
  in.tpr = 0.941;
  in.fpr = 0.0345;
  const auto r = preservation_condition(in);
  ASSERT_TRUE(r.rhs.has_value());
  EXPECT_NEAR(*r.rhs, 1.8, 1e-12);
  // Both rates are published rounded, so the ratio is only good to 0.1.
  EXPECT_NEAR(*r.ratio, 27.2, 0.1);
  EXPECT_EQ(r.status, ConditionStatus::holds);
}

TEST(Theory, ConditionFailsBelowThreshold) {
  auto in = worked();
  in.tpr = 0.15;
  in.fpr = 0.1;
  EXPECT_EQ(preservation_condition(in).status, ConditionStatus::fails);
  EXPECT_LT(delta_p(in), 0.0);
}

TEST(Theory, NonNegativeNumeratorHoldsTrivially) {
  auto in = worked();
  in.perf_lora[0] = 0.95;
  const auto r = preservation_condition(in);
  EXPECT_EQ(r.status, ConditionStatus::holds_trivially);
  EXPECT_LE(*r.rhs, 0.0);
  EXPECT_GE(delta_p(in), 0.0);
}

TEST(Theory, ZeroFprIsVacuous) {
  auto in = worked();
  in.fpr = 0.0;
  const auto r = preservation_condition(in);
  EXPECT_EQ(r.status, ConditionStatus::vacuous);
  EXPECT_FALSE(r.rhs.has_value());
  EXPECT_FALSE(r.ratio.has_value());
  EXPECT_FALSE(r.reason.empty());
  EXPECT_GE(delta_p(in), 0.0);
}

TEST(Theory, NoMinorityGainIsVacuous) {
  auto in = worked();
  in.perf_lora[1] = 0.70;
  EXPECT_EQ(preservation_condition(in).status, ConditionStatus::vacuous);
  EXPECT_STREQ(to_string(ConditionStatus::vacuous), "vacuous");
}

TEST(Theory, InvalidInputsAreRejected) {
  auto in = worked();
  in.p = 0.0;
  EXPECT_THROW(delta_p(in), Error);
  in = worked();
  in.tpr = 1.5;
  EXPECT_THROW(predicted_group_perf(in), Error);
  EXPECT_THROW(monte_carlo_validate(worked(), 0, 1), Error);
}

TEST(Theory, DeltaPIsTheWeightedGroupChange) {
  Rng rng(21);
  for (int i = 0; i < 10000; ++i) {
    const auto in = random_inputs(rng);
    const auto g = predicted_group_perf(in);
    const double identity = (1.0 - in.p) * (g[0] - in.perf_base[0]) + in.p * (g[1] - in.perf_base[1]);
    ASSERT_NEAR(delta_p(in), identity, 1e-12);
  }
}

TEST(Theory, ConditionStatusAgreesWithSignOfDeltaP) {
  Rng rng(22);
  for (int i = 0; i < 10000; ++i) {
    const auto in = random_inputs(rng);
    const auto r = preservation_condition(in);
    const double d = delta_p(in);
    if (r.status == ConditionStatus::holds || r.status == ConditionStatus::holds_trivially) {
      ASSERT_GE(d, -1e-12);
    }
    if (r.status == ConditionStatus::fails) ASSERT_LT(d, 1e-12);
  }
}

TEST(Theory, EqualityMeansNoChange) {
  TheoryInputs in;
  in.p = 0.5;
  in.perf_base = {0.9, 0.5};
  in.perf_lora = {0.8, 0.7};
  in.fpr = 0.4;
  in.tpr = 0.2;  // ratio 0.5 = rhs
  EXPECT_NEAR(*preservation_condition(in).rhs, 0.5, 1e-15);
  EXPECT_LE(std::abs(delta_p(in)), 1e-12);

  Rng rng(23);
  int checked = 0;
  while (checked < 1000) {
    auto r = random_inputs(rng);
    if (r.perf_lora[1] <= r.perf_base[1] || r.perf_lora[0] >= r.perf_base[0] || r.fpr == 0.0) continue;
    const double rhs = *preservation_condition(r).rhs;
    if (rhs * r.fpr > 1.0) continue;
    r.tpr = rhs * r.fpr;
    ASSERT_LE(std::abs(delta_p(r)), 1e-12);
    ++checked;
  }
}

TEST(MonteCarlo, DegenerateInputsAreExact) {
  TheoryInputs in;
  in.p = 0.3;
  in.perf_base = {1.0, 0.0};
  in.perf_lora = {0.0, 1.0};
  in.tpr = 1.0;
  in.fpr = 0.0;
  const auto mc = monte_carlo_validate(in, 5000, 4);
  const auto g = predicted_group_perf(in);
  EXPECT_EQ(mc.group_perf, g);
  EXPECT_EQ(mc.delta_p, delta_p(in));
  EXPECT_EQ(mc.delta_p_se, 0.0);
  EXPECT_EQ(mc.group_counts[0] + mc.group_counts[1], 5000u);
}

TEST(MonteCarlo, AgreesWithClosedFormWithinThreeStandardErrors) {
  Rng rng(24);
  for (int trial = 0; trial < 5; ++trial) {
    auto in = random_inputs(rng);
    in.p = rng.uniform(0.05, 0.5);
    const auto mc = monte_carlo_validate(in, 1000000, 100 + trial);
    const auto g = predicted_group_perf(in);
    for (int k = 0; k < 2; ++k) EXPECT_LE(std::abs(mc.group_perf[k] - g[k]), 3.0 * mc.group_se[k] + 1e-12);
    EXPECT_LE(std::abs(mc.delta_p - delta_p(in)), 3.0 * mc.delta_p_se + 1e-12);
  }
  const auto mc = monte_carlo_validate(worked(), 1000000, 9);
  EXPECT_LE(std::abs(mc.delta_p - 0.0072), 3.0 * mc.delta_p_se);
}

TEST(MonteCarlo, SameSeedSameResult) {
  const auto a = monte_carlo_validate(worked(), 20000, 77);
  const auto b = monte_carlo_validate(worked(), 20000, 77);
  EXPECT_EQ(a.group_perf, b.group_perf);
  EXPECT_EQ(a.delta_p, b.delta_p);
  EXPECT_EQ(a.delta_p_se, b.delta_p_se);
}

TEST(MonteCarlo, StandardErrorShrinksAsInverseRootN) {
  double prev = 0.0;
  for (std::size_t n : {1000u, 10000u, 100000u, 1000000u}) {
    const double se = monte_carlo_validate(worked(), n, 5).delta_p_se;
    if (prev > 0.0) {
      const double ratio = prev / se;
      EXPECT_GT(ratio, std::sqrt(10.0) * 0.8) << n;
      EXPECT_LT(ratio, std::sqrt(10.0) * 1.25) << n;
    }
    prev = se;
  }
}

}  // namespace
}  // namespace fairgate
