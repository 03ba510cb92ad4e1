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

// Runs every acceptance criterion at its stated tolerance and prints one
// PASS/FAIL line per criterion. Exit status is nonzero when any fails.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <string>
#include <thread>
#include <vector>

#include "fairgate/cli.hpp"
#include "fairgate/config.hpp"
#include "fairgate/pipeline.hpp"
#include "oracles.hpp"

using namespace fairgate;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int failures = 0;

void verdict(int id, bool pass, const std::string& title, const std::string& detail, double secs) {
  std::printf("criterion %2d: %s  %s: %s [%.1f s]\n", id, pass ? "PASS" : "FAIL", title.c_str(), detail.c_str(), secs);
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// ---------------------------------------------------------------------------
// 1. Gradients

struct Toy {
  BaseModel model;
  std::vector<AdapterUnit> units;
  std::vector<TargetBank> banks;
  BiasDetector detector;
  std::vector<Vector> x;
  LossBatch batch;
};

Toy make_toy(std::uint64_t seed) {
  Toy t;
  Rng rng(seed);
  const std::size_t n = 10;
  t.model = make_model(3, 3, {{6, 6}, Activation::tanh}, rng);
  LoraAdapter a = init_adapter(t.model.layers[1].spec, 1, 2, rng);
  for (double& v : a.up.values) v = 0.5 * rng.normal();
  t.units.push_back({a, 0});
  DetectorSpec spec;
  spec.layer = 0;
  spec.hidden_units = 5;
  t.detector = make_detector(6, spec, 0, rng);
  for (double& b : t.detector.hidden.bias) b = rng.uniform(-0.2, 0.2);
  Dataset ds;
  ds.features = Matrix(n, 3);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < 3; ++c) ds.features(i, c) = rng.normal();
    ds.labels.push_back(i % 3);
    ds.sensitive.push_back(i % 4 == 1 ? Sensitive::minority : (i == 6 ? Sensitive::unlabeled : Sensitive::majority));
    ds.split.push_back(Split::train);
  }
  std::vector<Sensitive> all_majority(n, Sensitive::majority);
  t.banks.push_back(build_target_bank(t.model, ds, 1, all_majority));
  for (std::size_t i = 0; i < n; ++i) t.x.emplace_back(ds.row(i).begin(), ds.row(i).end());
  for (std::size_t i = 0; i < n; ++i) {
    t.batch.inputs.push_back(t.x[i]);
    t.batch.labels.push_back(ds.labels[i]);
    t.batch.sensitive.push_back(ds.sensitive[i]);
  }
  return t;
}

double total_loss_error(Toy& t, const LossWeights& w) {
  LossContext ctx;
  ctx.model = &t.model;
  ctx.units = t.units;
  ctx.banks = t.banks;
  ctx.detector = &t.detector;
  ctx.detector_weights = {0.7, 2.1};
  ctx.gate = GateMode::ground_truth;
  const auto r = total_loss(t.batch, ctx, w);
  std::vector<double*> handles;
  Vector analytic;
  append_handles(handles, t.units[0].adapter.down);
  append_handles(handles, t.units[0].adapter.up);
  append_values(analytic, r.adapter_grads[0].down);
  append_values(analytic, r.adapter_grads[0].up);
  append_handles(handles, t.detector.hidden.weight);
  append_handles(handles, t.detector.hidden.bias);
  append_handles(handles, t.detector.output.weight);
  append_handles(handles, t.detector.output.bias);
  append_values(analytic, r.detector_grad->hidden.weight);
  append_values(analytic, r.detector_grad->hidden.bias);
  append_values(analytic, r.detector_grad->output.weight);
  append_values(analytic, r.detector_grad->output.bias);
  const Vector numeric = finite_difference_gradient([&] { return total_loss(t.batch, ctx, w, false).value; }, handles);
  return max_relative_error(analytic, numeric);
}

double base_task_error(std::uint64_t seed) {
  Rng rng(seed);
  BaseModel m = make_model(3, 3, {{6, 5}, Activation::tanh}, rng);
  Dataset ds;
  ds.features = Matrix(8, 3);
  for (std::size_t i = 0; i < 8; ++i) {
    for (std::size_t c = 0; c < 3; ++c) ds.features(i, c) = rng.normal();
    ds.labels.push_back(i % 3);
    ds.sensitive.push_back(Sensitive::majority);
    ds.split.push_back(Split::train);
  }
  const std::vector<std::size_t> rows = {0, 1, 2, 3, 4, 5, 6, 7};
  GradientTape tape(m.layers);
  task_loss(m, ds, rows, &tape);
  std::vector<double*> handles;
  Vector analytic;
  for (std::size_t l = 0; l < m.depth(); ++l) {
    append_handles(handles, m.layers[l].weight);
    append_handles(handles, m.layers[l].bias);
    append_values(analytic, tape[l].weight);
    append_values(analytic, tape[l].bias);
  }
  const Vector numeric = finite_difference_gradient([&] { return task_loss(m, ds, rows, nullptr); }, handles);
  return max_relative_error(analytic, numeric);
}

double detector_error(std::uint64_t seed, Pooling pooling) {
  Rng rng(seed);
  BiasDetector d = make_detector(4, {1, 5, pooling, 3, 0.5}, 0, rng);
  for (double& b : d.hidden.bias) b = rng.uniform(-0.3, 0.3);
  const std::size_t len = pooling == Pooling::attention ? 3 : 1;
  std::vector<std::vector<Vector>> seqs(6);
  for (auto& s : seqs) {
    for (std::size_t k = 0; k < len; ++k) {
      Vector v(4);
      for (double& x : v) x = rng.normal();
      s.push_back(v);
    }
  }
  std::vector<DetectorExample> batch;
  for (int i = 0; i < 6; ++i) batch.push_back({seqs[i], i % 3 == 0 ? 1 : 0});
  const ClassWeights w{0.75, 1.5};
  DetectorGradient g = DetectorGradient::zeros_like(d);
  detector_loss(d, batch, w, &g);
  std::vector<double*> handles;
  Vector analytic;
  append_handles(handles, d.hidden.weight);
  append_handles(handles, d.hidden.bias);
  append_handles(handles, d.output.weight);
  append_handles(handles, d.output.bias);
  append_values(analytic, g.hidden.weight);
  append_values(analytic, g.hidden.bias);
  append_values(analytic, g.output.weight);
  append_values(analytic, g.output.bias);
  if (pooling == Pooling::attention) {
    append_handles(handles, d.attention.proj);
    append_handles(handles, d.attention.bias);
    append_handles(handles, d.attention.query);
    append_values(analytic, g.attention.proj);
    append_values(analytic, g.attention.bias);
    append_values(analytic, g.attention.query);
  }
  const Vector numeric = finite_difference_gradient([&] { return detector_loss(d, batch, w, nullptr); }, handles);
  return max_relative_error(analytic, numeric);
}

void criterion_1() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  int instances = 0;
  for (int trial = 0; trial < 20; ++trial) {
    worst = std::max(worst, base_task_error(1000 + trial));
    worst = std::max(worst, detector_error(2000 + trial, Pooling::none));
    worst = std::max(worst, detector_error(3000 + trial, Pooling::attention));
    for (const LossWeights& w : {LossWeights{1.0, 0.0, 0.0, 1.0}, LossWeights{0.0, 1.0, 0.0, 1.0},
                                 LossWeights{0.0, 0.0, 1.0, 1.0}, LossWeights{1.0, 0.6, 1.4, 1.0}}) {
      Toy t = make_toy(4000 + trial);
      worst = std::max(worst, total_loss_error(t, w));
    }
    instances += 7;
  }
  const double secs = seconds_since(t0);
  verdict(1, worst <= 1e-4 && secs < 60.0, "gradient correctness",
          fmt("worst relative error %.2e", worst) + " over " + std::to_string(instances) + " instances", secs);
}

// ---------------------------------------------------------------------------
// 2. Gating identities

PipelineConfig small_config(std::uint64_t seed) {
  PipelineConfig cfg;
  cfg.mode = Mode::partial;
  cfg.label_fraction = 0.5;
  cfg.seed = seed;
  cfg.monte_carlo_samples = 1000;
  cfg.data.synth.n = 1000;
  cfg.model.hidden = {12, 12};
  cfg.model_train.epochs = 5;
  cfg.detector.spec.hidden_units = 8;
  cfg.detector.train.epochs = 5;
  cfg.adapter.train.epochs = 5;
  return cfg;
}

bool untriggered_unchanged(const Evaluation& ev) {
  for (std::size_t r = 0; r < ev.fired.size(); ++r) {
    if (!ev.fired[r] && ev.fairnet_preds[r] != ev.base_preds[r]) return false;
  }
  return true;
}

void criterion_2() {
  const auto t0 = Clock::now();
  bool a = true, b = true, c = true;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    Pipeline p(small_config(seed));
    p.prepare();
    p.stage1();
    p.stage2();
    p.stage3();
    p.stage4(Variant::full_method);
    const auto at_one = p.evaluate_at(1.0);
    a = a && at_one.fairnet_preds == at_one.base_preds;
    for (double tau : {0.3, 0.5, 0.7}) c = c && untriggered_unchanged(p.evaluate_at(tau));
  }
  // Zero up-projection with arbitrary detector decisions.
  Rng rng(77);
  for (int trial = 0; trial < 50; ++trial) {
    const BaseModel m = make_model(5, 3, {{8, 8}, Activation::tanh}, rng);
    const LoraAdapter adapter = init_adapter(m.layers[1].spec, 1, 3, rng);
    const std::vector<AdapterUnit> units = {{adapter, 0}};
    for (int i = 0; i < 20; ++i) {
      Vector x(5);
      for (double& v : x) v = 2.0 * rng.normal();
      const std::vector<bool> open = {rng.bernoulli(0.5)};
      b = b && conditional_forward(m, units, x, open).logits() == forward(m, x).logits();
    }
  }
  auto cfg = small_config(5);
  cfg.adapter.train.epochs = 0;
  Pipeline p(cfg);
  p.prepare();
  p.stage1();
  p.stage2();
  p.stage3();
  p.stage4(Variant::full_method);
  for (double tau : {0.0, 0.5}) {
    const auto ev = p.evaluate_at(tau);
    b = b && ev.fairnet_preds == ev.base_preds;
  }
  const double secs = seconds_since(t0);
  verdict(2, a && b && c && secs < 10.0, "gating identities",
          std::string("tau=1 ") + (a ? "identical" : "differs") + ", B=0 " + (b ? "identical" : "differs") +
              ", untriggered " + (c ? "unchanged" : "changed"),
          secs);
}

// ---------------------------------------------------------------------------
// 3-4. Theory

TheoryInputs random_inputs(Rng& rng) {
  TheoryInputs in;
  in.p = rng.uniform(0.02, 0.98);
  in.perf_base = {rng.uniform(), rng.uniform()};
  in.perf_lora = {rng.uniform(), rng.uniform()};
  in.tpr = rng.uniform();
  in.fpr = rng.uniform();
  return in;
}

void criterion_3() {
  const auto t0 = Clock::now();
  Rng rng(31);
  int within = 0;
  double worst_z = 0.0;
  for (int i = 0; i < 10; ++i) {
    const auto in = random_inputs(rng);
    const auto mc = monte_carlo_validate(in, 1000000, 500 + i);
    const auto g = predicted_group_perf(in);
    const double z[3] = {std::abs(mc.group_perf[0] - g[0]) / mc.group_se[0],
                         std::abs(mc.group_perf[1] - g[1]) / mc.group_se[1],
                         std::abs(mc.delta_p - delta_p(in)) / mc.delta_p_se};
    bool ok = true;
    for (double v : z) {
      worst_z = std::max(worst_z, v);
      ok = ok && v <= 3.0;
    }
    within += ok ? 1 : 0;
  }
  double worst_identity = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const auto in = random_inputs(rng);
    const auto g = predicted_group_perf(in);
    const double identity = (1.0 - in.p) * (g[0] - in.perf_base[0]) + in.p * (g[1] - in.perf_base[1]);
    worst_identity = std::max(worst_identity, std::abs(delta_p(in) - identity));
  }
  const double secs = seconds_since(t0);
  verdict(3, within == 10 && worst_identity <= 1e-12 && secs < 30.0, "theory closed forms",
          std::to_string(within) + "/10 inputs within 3 SE (worst " + fmt("%.2f SE", worst_z) +
              "), identity error " + fmt("%.1e", worst_identity),
          secs);
}

void criterion_4() {
  const auto t0 = Clock::now();
  Rng rng(41);
  double worst = 0.0;
  int boundary = 0;
  while (boundary < 1000) {
    auto in = random_inputs(rng);
    if (in.perf_lora[1] <= in.perf_base[1] || in.perf_lora[0] >= in.perf_base[0]) continue;
    const double rhs = *preservation_condition(in).rhs;
    if (rhs * in.fpr > 1.0) continue;
    in.tpr = rhs * in.fpr;
    worst = std::max(worst, std::abs(delta_p(in)));
    ++boundary;
  }
  int trivial = 0, trivial_ok = 0;
  while (trivial < 1000) {
    auto in = random_inputs(rng);
    if (in.perf_lora[1] <= in.perf_base[1] || in.fpr == 0.0) continue;
    in.perf_lora[0] = rng.uniform(in.perf_base[0], 1.0);
    ++trivial;
    const auto r = preservation_condition(in);
    trivial_ok += r.status == ConditionStatus::holds_trivially && *r.rhs <= 0.0 ? 1 : 0;
  }
  const double secs = seconds_since(t0);
  verdict(4, worst <= 1e-12 && trivial_ok == trivial && secs < 1.0, "preservation boundary",
          fmt("max |dP| at equality %.1e", worst) + ", " + std::to_string(trivial_ok) + "/" +
              std::to_string(trivial) + " non-positive rhs reported holds_trivially",
          secs);
}

// ---------------------------------------------------------------------------
// 5. Metrics

bool metrics_match(const std::vector<int>& p, const std::vector<int>& y, const std::vector<int>& g) {
  const auto want = oracle::count(p, y, g);
  const std::vector<std::size_t> pp(p.begin(), p.end()), yy(y.begin(), y.end());
  std::vector<Sensitive> ss;
  for (int b : g) ss.push_back(sensitive_from_bit(b));
  auto close = [](double a, double b) { return std::abs(a - b) <= 1e-12; };
  auto same = [&](const MaybeRate& a, const std::optional<double>& b) {
    return a.has_value() == b.has_value() && (!a || close(*a, *b));
  };
  if (!close(overall_accuracy(pp, yy), want.acc)) return false;
  if (!want.both_groups) {
    try {
      group_accuracy(pp, yy, ss);
      return false;
    } catch (const Error&) {
    }
    return !dp(pp, ss).has_value();
  }
  const auto r = evaluate_fairness(pp, yy, ss);
  return close(r.group_acc[0], want.g0) && close(r.group_acc[1], want.g1) &&
         close(r.wga, std::min(want.g0, want.g1)) && same(r.dp, want.dp) && same(r.eop, want.eop) &&
         same(r.eod, want.eod);
}

void criterion_5() {
  const auto t0 = Clock::now();
  std::size_t cases = 0, mismatches = 0;
  for (std::size_t n = 1; n <= 6; ++n) {
    const std::size_t total = std::size_t{1} << (3 * n);
    for (std::size_t bits = 0; bits < total; ++bits) {
      std::vector<int> p(n), y(n), g(n);
      for (std::size_t i = 0; i < n; ++i) {
        p[i] = static_cast<int>((bits >> (3 * i)) & 1);
        y[i] = static_cast<int>((bits >> (3 * i + 1)) & 1);
        g[i] = static_cast<int>((bits >> (3 * i + 2)) & 1);
      }
      ++cases;
      mismatches += metrics_match(p, y, g) ? 0 : 1;
    }
  }
  const std::size_t exhaustive = cases;
  Rng rng(51);
  for (int trial = 0; trial < 100000; ++trial) {
    const std::size_t n = 7 + rng.below(6);
    std::vector<int> p(n), y(n), g(n);
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = rng.bernoulli(0.5);
      y[i] = rng.bernoulli(0.5);
      g[i] = rng.bernoulli(0.3);
    }
    ++cases;
    mismatches += metrics_match(p, y, g) ? 0 : 1;
  }
  const double secs = seconds_since(t0);
  verdict(5, mismatches == 0 && secs < 60.0, "metric oracles",
          std::to_string(mismatches) + " mismatches in " + std::to_string(cases) + " datasets (" +
              std::to_string(exhaustive) + " enumerated for n <= 6, 100000 sampled for 7 <= n <= 12)",
          secs);
}

// ---------------------------------------------------------------------------
// 6. LOF

void criterion_6() {
  const auto t0 = Clock::now();
  Rng rng(61);
  double worst = 0.0;
  for (int set = 0; set < 50; ++set) {
    const std::size_t n = 20 + rng.below(181);
    const std::size_t d = 1 + rng.below(8);
    const std::size_t k = 1 + rng.below(20);
    std::vector<Vector> pts(n, Vector(d));
    for (auto& p : pts) {
      for (double& v : p) v = rng.normal();
    }
    const Vector got = lof_scores(pts, k);
    const auto want = oracle::lof(pts, k);
    for (std::size_t i = 0; i < n; ++i) worst = std::max(worst, std::abs(got[i] - want[i]));
  }
  const double secs = seconds_since(t0);
  verdict(6, worst <= 1e-9 && secs < 30.0, "LOF oracle", fmt("max deviation %.1e over 50 point sets", worst), secs);
}

// ---------------------------------------------------------------------------
// 7, 8, 10. Five-seed experiment

struct SeedRuns {
  std::vector<std::vector<RunResult>> runs;  // [seed][variant]
  double secs = 0.0;
};

const std::array<Variant, 4> kVariants = {Variant::full_method, Variant::no_contrastive, Variant::no_detector,
                                          Variant::neither};

SeedRuns five_seeds() {
  SeedRuns s;
  const auto t0 = Clock::now();
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    PipelineConfig cfg;
    cfg.seed = seed;
    s.runs.push_back(run_variants(cfg, kVariants));
  }
  s.secs = seconds_since(t0);
  return s;
}

std::vector<double> collect_metric(const SeedRuns& s, int variant, const std::function<double(const FairnessReport&)>& f) {
  std::vector<double> out;
  for (const auto& seed : s.runs) {
    out.push_back(variant < 0 ? f(seed[0].evaluation.base) : f(seed[static_cast<std::size_t>(variant)].evaluation.fairnet));
  }
  return out;
}

double eod_or_nan(const FairnessReport& r) { return r.eod ? *r.eod : std::nan(""); }

std::string pct(double v) { return fmt("%.2f", 100.0 * v); }

void criterion_7(const SeedRuns& s) {
  const auto wga = [](const FairnessReport& r) { return r.wga; };
  const auto acc = [](const FairnessReport& r) { return r.acc; };
  const double erm_wga = median(collect_metric(s, -1, wga)), full_wga = median(collect_metric(s, 0, wga));
  const double erm_eod = median(collect_metric(s, -1, eod_or_nan)), full_eod = median(collect_metric(s, 0, eod_or_nan));
  const double erm_acc = median(collect_metric(s, -1, acc)), full_acc = median(collect_metric(s, 0, acc));
  const bool ok = full_wga >= erm_wga + 0.05 && full_eod <= erm_eod - 0.02 && full_acc >= erm_acc - 0.01 &&
                  s.secs / 5.0 < 300.0;
  verdict(7, ok, "scaled headline experiment",
          "median WGA " + pct(full_wga) + " vs ERM " + pct(erm_wga) + ", EOD " + pct(full_eod) + " vs " +
              pct(erm_eod) + ", ACC " + pct(full_acc) + " vs " + pct(erm_acc),
          s.secs);
}

void criterion_8(const SeedRuns& s) {
  const auto wga = [](const FairnessReport& r) { return r.wga; };
  const auto acc = [](const FairnessReport& r) { return r.acc; };
  const double full_wga = median(collect_metric(s, 0, wga));
  const double nc_wga = median(collect_metric(s, 1, wga));
  const double erm_wga = median(collect_metric(s, -1, wga));
  const double neither_wga = median(collect_metric(s, 3, wga));
  const double full_acc = median(collect_metric(s, 0, acc));
  const double nd_acc = median(collect_metric(s, 2, acc));
  const bool contrastive = full_wga > nc_wga;
  const bool detector = full_acc >= nd_acc;
  const bool between = erm_wga <= neither_wga && neither_wga <= full_wga;
  verdict(8, contrastive && detector && between, "ablation ordering",
          "WGA full " + pct(full_wga) + (contrastive ? " > " : " <= ") + "w/o contrastive " + pct(nc_wga) +
              "; ACC full " + pct(full_acc) + (detector ? " >= " : " < ") + "w/o detector " + pct(nd_acc) +
              "; WGA w/o both " + pct(neither_wga) + (between ? " within " : " outside ") + "[ERM " + pct(erm_wga) +
              ", full " + pct(full_wga) + "]",
          0.0);
}

void criterion_10(const SeedRuns& s) {
  std::size_t checked = 0, reduced = 0;
  double worst_ratio = 0.0;
  for (const auto& seed : s.runs) {
    for (const auto& gap : seed[0].evaluation.alignment) {
      ++checked;
      reduced += gap.after < gap.before ? 1 : 0;
      worst_ratio = std::max(worst_ratio, gap.after / gap.before);
    }
  }
  verdict(10, checked > 0 && reduced == checked, "alignment invariant",
          std::to_string(reduced) + "/" + std::to_string(checked) +
              " (seed, class) gaps shrank, worst after/before " + fmt("%.3f", worst_ratio),
          0.0);
}

// ---------------------------------------------------------------------------
// 9. Detector sweeps

void criterion_9(std::vector<RunResult>& trained_out) {
  const auto t0 = Clock::now();
  PipelineConfig cfg;
  cfg.detector.kind = GateKind::trained;
  const std::size_t jobs = std::max(1u, std::thread::hardware_concurrency());
  std::vector<double> taus;
  for (int k = 0; k <= 10; ++k) taus.push_back(k / 10.0);
  const auto rows = sweep(cfg, SweepAxis::threshold, taus, jobs);
  bool monotone = true;
  for (std::size_t k = 1; k < rows.size(); ++k) {
    monotone = monotone && rows[k].rates.tpr <= rows[k - 1].rates.tpr && rows[k].rates.fpr <= rows[k - 1].rates.fpr;
  }
  const auto& lo = rows.front().rates;
  const auto& hi = rows.back().rates;
  const bool endpoints = lo.tpr == 1.0 && lo.fpr == 1.0 && lo.ratio && *lo.ratio == 1.0 && hi.tpr == 0.0 &&
                         hi.fpr == 0.0 && !hi.ratio;

  const std::vector<double> noise = {1.0};
  const auto noisy = sweep(cfg, SweepAxis::noise_rate, noise, 1).front();
  const double ratio = noisy.rates.ratio ? *noisy.rates.ratio : std::nan("");
  const bool ratio_ok = noisy.rates.ratio && ratio >= 0.8 && ratio <= 1.25;
  const bool wga_ok = std::abs(noisy.metrics.wga - noisy.base.wga) <= 0.02;

  trained_out.push_back(run_experiment(cfg));
  const double secs = seconds_since(t0);
  verdict(9, monotone && endpoints && ratio_ok && wga_ok && secs < 600.0, "detector sweeps",
          std::string("rates ") + (monotone ? "non-increasing" : "not monotone") + " in tau, endpoints " +
              (endpoints ? "exact" : "wrong") + "; full noise ratio " + fmt("%.3f", ratio) +
              (ratio_ok ? " in" : " outside") + " [0.8, 1.25], WGA " + pct(noisy.metrics.wga) + " vs ERM " +
              pct(noisy.base.wga),
          secs);
}

// ---------------------------------------------------------------------------
// 11. Determinism

void criterion_11() {
  const fs::path root = fs::temp_directory_path() / "fairgate_acceptance";
  fs::remove_all(root);
  const PipelineConfig cfg;
  const auto t0 = Clock::now();
  cmd_train(cfg, root / "a");
  const double first = seconds_since(t0);
  const auto t1 = Clock::now();
  cmd_train(cfg, root / "b");
  const double second = seconds_since(t1);
  const std::string a = OutputDir::read_file(root / "a" / "report.json");
  const std::string b = OutputDir::read_file(root / "b" / "report.json");
  const bool same = a == b;
  verdict(11, same && second < first + 10.0, "determinism",
          std::string("report.json ") + (same ? "byte-identical" : "differs") + " (" + std::to_string(a.size()) +
              " bytes, sha256 " + sha256_hex(a).substr(0, 16) + ")",
          first + second);
}

// ---------------------------------------------------------------------------
// 12. Overhead

void criterion_12(const RunResult& trained, const RunResult& switched) {
  const auto t0 = Clock::now();
  bool ok = true;
  std::string detail;
  for (const RunResult* r : {&trained, &switched}) {
    const auto& cfg = r->config;
    const auto& spec = r->stage1.model.layers.at(cfg.adapter.layer).spec;
    std::size_t expected = cfg.adapter.rank * (spec.in_dim + spec.out_dim);
    if (r->stage2.gate.detector) {
      const std::size_t in = r->stage1.model.layers.at(cfg.detector.spec.layer).spec.out_dim;
      const std::size_t h = cfg.detector.spec.hidden_units;
      expected += in * h + h + h + 1;
    }
    const auto& o = r->overhead;
    ok = ok && o.params_added == expected && o.flops_per_sample_triggered > o.flops_per_sample_base;
    detail += std::string(to_string(r->stage2.gate.kind)) + " gate: params_added " + std::to_string(o.params_added) +
              " (expected " + std::to_string(expected) + "), FLOPs " + std::to_string(o.flops_per_sample_base) +
              " -> " + std::to_string(o.flops_per_sample_triggered) + "; ";
  }
  detail.resize(detail.size() - 2);
  verdict(12, ok, "overhead accounting", detail, seconds_since(t0));
}

}  // namespace

int main() {
  try {
    criterion_1();
    criterion_2();
    criterion_3();
    criterion_4();
    criterion_5();
    criterion_6();
    const SeedRuns runs = five_seeds();
    criterion_7(runs);
    criterion_8(runs);
    std::vector<RunResult> trained;
    criterion_9(trained);
    criterion_10(runs);
    criterion_11();
    criterion_12(trained.front(), runs.runs.front().front());
  } catch (const std::exception& e) {
    std::printf("error: %s\n", e.what());
    return 2;
  }
  std::printf("%d of 12 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
