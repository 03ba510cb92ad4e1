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

#include "fairgate/fairlora.hpp"
#include "fairgate/model.hpp"
#include "oracles.hpp"

namespace fairgate {
namespace {

BaseModel small_model(std::uint64_t seed, Activation act = Activation::tanh) {
  Rng rng(seed);
  return make_model(3, 2, {{6, 6}, act}, rng);
}

LoraAdapter random_adapter(const BaseModel& m, std::size_t layer, std::size_t rank, Rng& rng) {
  LoraAdapter a = init_adapter(m.layers[layer].spec, layer, rank, rng);
  for (double& v : a.up.values) v = rng.normal();
  return a;
}

TEST(InitAdapter, StartsWithZeroDelta) {
  Rng rng(1);
  const LoraAdapter a = init_adapter({32, 32, Activation::tanh}, 1, 4, rng);
  EXPECT_EQ(a.rank(), 4u);
  for (double v : delta_weight(a).values) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(a.param_count(), 4u * (32 + 32));
}

TEST(InitAdapter, RankBounds) {
  Rng rng(1);
  EXPECT_NO_THROW(init_adapter({32, 32, Activation::tanh}, 0, 16, rng));
  for (std::size_t bad : {std::size_t{0}, std::size_t{17}}) {
    try {
      init_adapter({32, 32, Activation::tanh}, 0, bad, rng);
      FAIL() << bad;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), "invalid_rank");
    }
  }
  EXPECT_THROW(init_adapter({10, 32, Activation::tanh}, 0, 6, rng), Error);
}

TEST(InitAdapter, SameSeedSameDown) {
  Rng a(7), b(7);
  EXPECT_EQ(init_adapter({8, 8, Activation::tanh}, 0, 2, a), init_adapter({8, 8, Activation::tanh}, 0, 2, b));
}

TEST(DeltaWeight, OuterProduct) {
  LoraAdapter a{0, Matrix::from_rows({{3, 4}}), Matrix::from_rows({{1}, {2}})};
  EXPECT_EQ(delta_weight(a), Matrix::from_rows({{3, 4}, {6, 8}}));
}

TEST(DeltaWeight, RankNeverExceedsR) {
  Rng rng(3);
  for (std::size_t r = 1; r <= 5; ++r) {
    for (int trial = 0; trial < 5; ++trial) {
      LoraAdapter a = init_adapter({12, 10, Activation::tanh}, 0, r, rng);
      for (double& v : a.up.values) v = rng.normal();
      const Matrix d = delta_weight(a);
      std::vector<std::vector<double>> rows(d.rows, std::vector<double>(d.cols));
      for (std::size_t i = 0; i < d.rows; ++i) {
        for (std::size_t j = 0; j < d.cols; ++j) rows[i][j] = d(i, j);
      }
      EXPECT_EQ(oracle::rank(rows), r);
    }
  }
}

TEST(ConditionalForward, ClosedGatesMatchBaseBitwise) {
  const BaseModel m = small_model(2);
  Rng rng(5);
  const std::vector<AdapterUnit> units = {{random_adapter(m, 1, 2, rng), 0}};
  const Vector x = {0.3, -1.2, 2.0};
  EXPECT_EQ(conditional_forward(m, units, x, AttributeScores{{0, 0.4}}, 0.5), forward(m, x));
  EXPECT_EQ(conditional_forward(m, units, x, AttributeScores{{0, 0.5}}, 0.5), forward(m, x));
  EXPECT_NE(conditional_forward(m, units, x, AttributeScores{{0, 0.51}}, 0.5), forward(m, x));
}

TEST(ConditionalForward, ZeroUpMatchesBaseForAnyScore) {
  const BaseModel m = small_model(2);
  Rng rng(5);
  const std::vector<AdapterUnit> units = {{init_adapter(m.layers[1].spec, 1, 3, rng), 0}};
  for (double s : {0.0, 0.5, 0.9, 1.0}) {
    for (const Vector& x : {Vector{0.3, -1.2, 2.0}, Vector{-4, 0, 1e-3}}) {
      EXPECT_EQ(conditional_forward(m, units, x, AttributeScores{{0, s}}, 0.2), forward(m, x));
    }
  }
}

TEST(ConditionalForward, TwoUnitsOnOneLayerSumTheirDeltas) {
  const BaseModel m = small_model(3);
  Rng rng(8);
  const AdapterUnit a{random_adapter(m, 1, 2, rng), 0};
  const AdapterUnit b{random_adapter(m, 1, 3, rng), 1};
  const std::vector<AdapterUnit> both = {a, b};
  BaseModel merged = m;
  const Matrix da = delta_weight(a.adapter), db = delta_weight(b.adapter);
  for (std::size_t i = 0; i < da.values.size(); ++i) merged.layers[1].weight.values[i] += da.values[i] + db.values[i];
  const Vector x = {1.0, 0.5, -0.25};
  const auto gated = conditional_forward(m, both, x, AttributeScores{{0, 1.0}, {1, 1.0}}, 0.5);
  const auto reference = forward(merged, x);
  for (std::size_t l = 0; l < m.depth(); ++l) {
    for (std::size_t i = 0; i < gated.layers[l].output.size(); ++i) {
      EXPECT_NEAR(gated.layers[l].output[i], reference.layers[l].output[i], 1e-12);
    }
  }
  // Only the fired attribute contributes.
  const auto only_a = conditional_forward(m, both, x, AttributeScores{{0, 1.0}, {1, 0.0}}, 0.5);
  const std::vector<AdapterUnit> just_a = {a};
  EXPECT_EQ(only_a, conditional_forward(m, just_a, x, std::vector<bool>{true}));
}

TEST(ConditionalForward, MissingScoreIsAnError) {
  const BaseModel m = small_model(2);
  Rng rng(5);
  const std::vector<AdapterUnit> units = {{init_adapter(m.layers[1].spec, 1, 2, rng), 4}};
  try {
    conditional_forward(m, units, Vector{0, 0, 0}, AttributeScores{{0, 0.9}}, 0.5);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "missing_score");
  }
}

TEST(CheckAdapter, RejectsShapeMismatch) {
  const BaseModel m = small_model(2);
  Rng rng(5);
  LoraAdapter a = init_adapter(m.layers[1].spec, 1, 2, rng);
  EXPECT_NO_THROW(check_adapter(m, a));
  a.target_layer = 0;  // layer 0 is 6x3, adapter is 6x6
  EXPECT_THROW(check_adapter(m, a), Error);
}

TEST(ConditionalBackward, MatchesFiniteDifferences) {
  for (int trial = 0; trial < 20; ++trial) {
    BaseModel m = small_model(100 + trial);
    Rng rng(200 + trial);
    std::vector<AdapterUnit> units = {{random_adapter(m, 1, 2, rng), 0}, {random_adapter(m, 0, 1, rng), 1}};
    Vector x = {rng.normal(), rng.normal(), rng.normal()};
    const std::vector<bool> open = {true, trial % 2 == 0};
    const std::size_t label = trial % 2;
    Vector probe(6);
    for (double& v : probe) v = rng.normal();

    auto loss = [&] {
      const auto t = conditional_forward(m, units, x, open);
      double s = stable_softmax_ce(t.logits(), label).loss;
      for (std::size_t i = 0; i < 6; ++i) s += probe[i] * t.representation(1)[i];
      return s;
    };
    std::vector<AdapterCache> caches;
    const auto t = conditional_forward(m, units, x, open, &caches);
    auto grads = zero_adapter_gradients(units);
    GradientTape tape(m.layers);
    const auto ce = stable_softmax_ce(t.logits(), label);
    const Vector dx = conditional_backward(m, units, open, t, caches, ce.gradient, {{1, probe}}, &grads, &tape);

    std::vector<double*> handles;
    Vector analytic;
    for (std::size_t u = 0; u < units.size(); ++u) {
      append_handles(handles, units[u].adapter.down);
      append_handles(handles, units[u].adapter.up);
      append_values(analytic, grads[u].down);
      append_values(analytic, grads[u].up);
    }
    for (std::size_t l = 0; l < m.depth(); ++l) {
      append_handles(handles, m.layers[l].weight);
      append_handles(handles, m.layers[l].bias);
      append_values(analytic, tape[l].weight);
      append_values(analytic, tape[l].bias);
    }
    append_handles(handles, x);
    append_values(analytic, dx);
    const Vector numeric = finite_difference_gradient(loss, handles);
    EXPECT_LE(max_relative_error(analytic, numeric), 1e-6) << "trial " << trial;
  }
}

}  // namespace
}  // namespace fairgate
