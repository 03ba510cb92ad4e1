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

// Four-stage training (base model, detector, target bank, gated adapters),
// evaluation against the uncorrected model, ablation variants and sweeps.
// Every stage draws from its own seed derived from the master seed, so a
// configuration fully determines every artifact.

#include <array>
#include <atomic>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "fairgate/contrastive.hpp"
#include "fairgate/data.hpp"
#include "fairgate/detector.hpp"
#include "fairgate/error.hpp"
#include "fairgate/fairlora.hpp"
#include "fairgate/metrics.hpp"
#include "fairgate/model.hpp"
#include "fairgate/overhead.hpp"
#include "fairgate/theory.hpp"

namespace fairgate {

enum class Mode { full, partial, unlabeled };
enum class GateKind { ground_truth_switch, trained };
enum class Variant { full_method, no_detector, no_contrastive, neither };

inline std::string_view to_string(Mode m) {
  switch (m) {
    case Mode::full: return "full";
    case Mode::partial: return "partial";
    case Mode::unlabeled: return "unlabeled";
  }
  return "full";
}

inline Mode parse_mode(std::string_view s) {
  if (s == "full") return Mode::full;
  if (s == "partial") return Mode::partial;
  if (s == "unlabeled") return Mode::unlabeled;
  throw Error("invalid_config", "unknown mode '" + std::string(s) + "'");
}

inline std::string_view to_string(GateKind k) { return k == GateKind::trained ? "trained" : "switch"; }

inline GateKind parse_gate_kind(std::string_view s) {
  if (s == "switch") return GateKind::ground_truth_switch;
  if (s == "trained") return GateKind::trained;
  throw Error("invalid_config", "unknown detector kind '" + std::string(s) + "'");
}

inline std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::full_method: return "full_method";
    case Variant::no_detector: return "no_detector";
    case Variant::no_contrastive: return "no_contrastive";
    case Variant::neither: return "neither";
  }
  return "full_method";
}

inline Variant parse_variant(std::string_view s) {
  if (s == "full_method") return Variant::full_method;
  if (s == "no_detector") return Variant::no_detector;
  if (s == "no_contrastive") return Variant::no_contrastive;
  if (s == "neither") return Variant::neither;
  throw Error("invalid_variant", "unknown ablation variant '" + std::string(s) + "'");
}

inline bool uses_detector(Variant v) { return v == Variant::full_method || v == Variant::no_contrastive; }
inline bool uses_contrastive(Variant v) { return v == Variant::full_method || v == Variant::no_detector; }

struct DataConfig {
  std::string source = "synthetic";  // "synthetic" or "csv"
  std::string path;
  SynthConfig synth;
  std::array<double, 3> split = {0.8, 0.1, 0.1};
};

struct DetectorConfig {
  GateKind kind = GateKind::ground_truth_switch;  // used in full mode only
  DetectorSpec spec;
  DetectorHyper train;
  std::size_t lof_k = 20;
  double contamination = 0.1;
};

struct AdapterConfig {
  std::size_t layer = 1;
  std::size_t rank = 4;
  TrainHyper train{5, 0.05, 64};
  NegativeStrategy negatives = NegativeStrategy::hard;
};

struct PipelineConfig {
  Mode mode = Mode::full;
  double label_fraction = 1.0;
  double noise_rate = 0.0;
  Variant variant = Variant::full_method;
  std::uint64_t seed = 0;
  std::size_t monte_carlo_samples = 100000;

  DataConfig data;
  ModelSpec model;
  TrainHyper model_train;
  DetectorConfig detector;
  AdapterConfig adapter;
  LossWeights loss;
};

/// Fixed seed offsets per stage.
namespace seed_offset {
inline constexpr std::uint64_t data = 1, split = 2, stage1 = 3, mask = 4, noise = 5, stage2 = 6, stage4 = 7,
                               monte_carlo = 8;
}

inline void validate(const PipelineConfig& cfg) {
  require(cfg.label_fraction >= 0.0 && cfg.label_fraction <= 1.0, "invalid_config", "label_fraction must lie in [0, 1]");
  require(cfg.noise_rate >= 0.0 && cfg.noise_rate <= 1.0, "invalid_config", "noise_rate must lie in [0, 1]");
  require(cfg.detector.spec.threshold >= 0.0 && cfg.detector.spec.threshold <= 1.0, "invalid_config",
          "threshold must lie in [0, 1]");
  require(cfg.detector.contamination > 0.0 && cfg.detector.contamination < 1.0, "invalid_config",
          "contamination must lie in (0, 1)");
  require(cfg.loss.margin > 0.0 && cfg.loss.detector >= 0.0 && cfg.loss.contrastive >= 0.0, "invalid_config",
          "loss weights must be non-negative and the margin positive");
  require(cfg.data.source == "synthetic" || cfg.data.source == "csv", "invalid_config",
          "data.source must be 'synthetic' or 'csv'");
  require(cfg.adapter.layer <= cfg.model.hidden.size() && cfg.detector.spec.layer <= cfg.model.hidden.size(),
          "invalid_config", "adapter or detector layer past the model depth");
}

// ---------------------------------------------------------------------------
// Data preparation

struct PreparedData {
  Dataset truth;  // full sensitive labels, used for evaluation
  Dataset view;   // labels visible to training for the configured mode
  std::vector<Sensitive> detector_labels;  // view labels after noise injection
};

inline PreparedData prepare_data(const PipelineConfig& cfg, double label_fraction, double noise_rate) {
  PreparedData out;
  if (cfg.data.source == "csv") {
    out.truth = load_csv(cfg.data.path);
  } else {
    SynthConfig synth = cfg.data.synth;
    synth.seed = derive_seed(cfg.seed, seed_offset::data);
    out.truth = stratified_split(generate_synthetic(synth), cfg.data.split, derive_seed(cfg.seed, seed_offset::split));
  }
  switch (cfg.mode) {
    case Mode::full: out.view = out.truth; break;
    case Mode::partial:
      out.view = mask_sensitive(out.truth, label_fraction, derive_seed(cfg.seed, seed_offset::mask));
      break;
    case Mode::unlabeled:
      out.view = out.truth;
      for (std::size_t i = 0; i < out.view.size(); ++i) {
        if (out.view.split[i] != Split::test) out.view.sensitive[i] = Sensitive::unlabeled;
      }
      break;
  }
  out.detector_labels = inject_label_noise(out.view, noise_rate, derive_seed(cfg.seed, seed_offset::noise)).sensitive;
  return out;
}

inline PreparedData prepare_data(const PipelineConfig& cfg) {
  return prepare_data(cfg, cfg.label_fraction, cfg.noise_rate);
}

// ---------------------------------------------------------------------------
// Stages

struct Stage1Result {
  BaseModel model;
  std::size_t best_epoch = 0;
  double val_accuracy = 0.0;
  std::vector<double> epoch_losses;
};

inline Stage1Result run_stage1(const PipelineConfig& cfg, const PreparedData& data) {
  auto erm = train_erm(data.view, cfg.model, cfg.model_train, derive_seed(cfg.seed, seed_offset::stage1));
  erm.model.frozen = true;
  return {std::move(erm.model), erm.best_epoch, erm.best_val_accuracy, std::move(erm.epoch_losses)};
}

/// The gate that opens adapters: either the ground-truth switch (full mode)
/// or a trained detector reading a base-model representation.
struct Gate {
  GateKind kind = GateKind::ground_truth_switch;
  std::optional<BiasDetector> detector;
};

struct Stage2Result {
  Gate gate;
  std::vector<Sensitive> group_labels;  // per-sample groups used by stage 3 and 4
  std::optional<DetectorRates> pseudo_label_quality;
};

inline std::vector<Vector> representations(const BaseModel& model, const Dataset& ds, std::span<const std::size_t> rows,
                                           std::size_t layer) {
  std::vector<Vector> out;
  out.reserve(rows.size());
  for (std::size_t i : rows) out.push_back(forward(model, ds.row(i)).representation(layer));
  return out;
}

inline Stage2Result run_stage2(const PipelineConfig& cfg, const PreparedData& data, const BaseModel& model) {
  require(cfg.detector.spec.layer < model.depth(), "invalid_config", "detector layer past the model depth");
  Stage2Result out;
  out.group_labels = data.view.sensitive;
  const auto train = data.view.indices(Split::train);
  const std::uint64_t seed = derive_seed(cfg.seed, seed_offset::stage2);

  if (cfg.mode == Mode::full && cfg.detector.kind == GateKind::ground_truth_switch) {
    out.gate.kind = GateKind::ground_truth_switch;
    return out;
  }
  out.gate.kind = GateKind::trained;
  const auto embeddings = representations(model, data.view, train, cfg.detector.spec.layer);
  std::vector<Sensitive> labels;
  labels.reserve(train.size());
  if (cfg.mode == Mode::unlabeled) {
    const Vector lof = lof_scores(embeddings, cfg.detector.lof_k);
    labels = pseudo_label(lof, cfg.detector.contamination);
    for (std::size_t r = 0; r < train.size(); ++r) out.group_labels[train[r]] = labels[r];
    std::vector<Sensitive> truth;
    for (std::size_t i : train) truth.push_back(data.truth.sensitive[i]);
    Vector flags(labels.size());
    for (std::size_t r = 0; r < labels.size(); ++r) flags[r] = labels[r] == Sensitive::minority ? 1.0 : 0.0;
    out.pseudo_label_quality = evaluate_rates(flags, truth, 0.5);
  } else {
    for (std::size_t i : train) labels.push_back(data.detector_labels[i]);
  }
  out.gate.detector = train_detector(std::span<const Vector>(embeddings), labels, cfg.detector.spec, cfg.detector.train,
                                     0, seed);
  return out;
}

inline TargetBank run_stage3(const PipelineConfig& cfg, const PreparedData& data, const BaseModel& model,
                             const Stage2Result& stage2) {
  return build_target_bank(model, data.view, cfg.adapter.layer, stage2.group_labels);
}

/// Scores in [0, 1] that the gate thresholds with `score > tau`: the
/// detector output, or the 0/1 group label for the switch.
inline Vector gate_scores(const BaseModel& model, const Gate& gate, const Dataset& ds, std::span<const std::size_t> rows,
                          std::span<const Sensitive> groups) {
  Vector scores;
  scores.reserve(rows.size());
  for (std::size_t i : rows) {
    if (gate.kind == GateKind::ground_truth_switch) {
      scores.push_back(groups[i] == Sensitive::minority ? 1.0 : 0.0);
    } else {
      const Vector h = forward(model, ds.row(i)).representation(gate.detector->layer);
      scores.push_back(score(*gate.detector, h));
    }
  }
  return scores;
}

struct Stage4Result {
  std::vector<AdapterUnit> units;
  TargetBank bank;
  std::size_t anchors = 0;
  std::vector<double> epoch_losses;
};

/// Trains the adapters on anchors only. With the contrastive objective the
/// loss is lambda_C times the mean triplet loss; otherwise cross-entropy on
/// the anchors. Base model and detector stay frozen.
inline Stage4Result run_stage4(const PipelineConfig& cfg, const PreparedData& data, const BaseModel& model,
                               const Stage2Result& stage2, const TargetBank& bank, Variant variant) {
  require(bank.layer == cfg.adapter.layer, "invalid_config", "target bank and adapter use different layers");
  Rng rng(derive_seed(cfg.seed, seed_offset::stage4));
  Stage4Result out;
  out.bank = bank;
  out.units.push_back({init_adapter(model.layers.at(cfg.adapter.layer).spec, cfg.adapter.layer, cfg.adapter.rank, rng), 0});

  const auto train = data.view.indices(Split::train);
  std::vector<std::size_t> anchors;
  if (!uses_detector(variant)) {
    anchors = train;
  } else {
    const Vector scores = gate_scores(model, stage2.gate, data.view, train, stage2.group_labels);
    for (std::size_t r = 0; r < train.size(); ++r) {
      if (scores[r] > cfg.detector.spec.threshold) anchors.push_back(train[r]);
    }
  }
  out.anchors = anchors.size();
  if (anchors.empty() || cfg.adapter.train.epochs == 0) return out;

  LossWeights weights;
  if (uses_contrastive(variant)) {
    weights = {0.0, 0.0, cfg.loss.contrastive, cfg.loss.margin};
  } else {
    weights = {1.0, 0.0, 0.0, cfg.loss.margin};
  }
  const std::array<TargetBank, 1> banks = {bank};
  LossContext ctx;
  ctx.model = &model;
  ctx.banks = banks;
  ctx.gate = GateMode::always;
  ctx.negatives = cfg.adapter.negatives;
  ctx.rng = &rng;

  LossBatch batch;
  const std::size_t bs = std::max<std::size_t>(cfg.adapter.train.batch_size, 1);
  for (std::size_t epoch = 1; epoch <= cfg.adapter.train.epochs; ++epoch) {
    rng.shuffle(anchors);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < anchors.size(); start += bs) {
      const std::size_t stop = std::min(anchors.size(), start + bs);
      batch.inputs.clear();
      batch.labels.clear();
      batch.sensitive.clear();
      for (std::size_t r = start; r < stop; ++r) {
        const std::size_t i = anchors[r];
        batch.inputs.push_back(data.view.row(i));
        batch.labels.push_back(data.view.labels[i]);
        batch.sensitive.push_back(stage2.group_labels[i]);
      }
      ctx.units = out.units;
      const TotalLoss loss = total_loss(batch, ctx, weights);
      require(std::isfinite(loss.value), "diverged", "adapter loss became non-finite at epoch " + std::to_string(epoch));
      epoch_loss += loss.value * static_cast<double>(stop - start);
      for (std::size_t u = 0; u < out.units.size(); ++u) {
        sgd_step(out.units[u].adapter, loss.adapter_grads[u], cfg.adapter.train.learning_rate);
      }
    }
    out.epoch_losses.push_back(epoch_loss / static_cast<double>(anchors.size()));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Evaluation

struct AlignmentGap {
  std::size_t label = 0;
  double before = 0.0;  // base representations
  double after = 0.0;   // gated representations
};

struct TheoryBridge {
  TheoryInputs inputs;
  std::array<double, 2> predicted{};
  std::array<double, 2> measured{};
  double predicted_delta_p = 0.0;
  double measured_delta_p = 0.0;
  ConditionResult condition;
  MonteCarloEstimate monte_carlo;
};

struct Evaluation {
  FairnessReport base;
  FairnessReport fairnet;
  DetectorRates rates;
  double tau = 0.5;
  std::vector<bool> fired;
  std::vector<std::size_t> base_preds;
  std::vector<std::size_t> fairnet_preds;
  std::vector<AlignmentGap> alignment;
  TheoryBridge theory;
};

inline std::vector<AlignmentGap> alignment_gaps(const std::vector<Vector>& before, const std::vector<Vector>& after,
                                                std::span<const std::size_t> labels, std::span<const Sensitive> groups) {
  std::map<std::size_t, std::array<Vector, 2>> sums_before, sums_after;
  std::map<std::size_t, std::array<std::size_t, 2>> counts;
  const std::size_t dim = before.empty() ? 0 : before.front().size();
  for (std::size_t r = 0; r < before.size(); ++r) {
    const int g = group_index(groups[r]);
    auto& sb = sums_before[labels[r]];
    auto& sa = sums_after[labels[r]];
    if (sb[g].empty()) sb[g].assign(dim, 0.0);
    if (sa[g].empty()) sa[g].assign(dim, 0.0);
    for (std::size_t c = 0; c < dim; ++c) {
      sb[g][c] += before[r][c];
      sa[g][c] += after[r][c];
    }
    ++counts[labels[r]][g];
  }
  std::vector<AlignmentGap> out;
  for (const auto& [label, cnt] : counts) {
    if (cnt[0] == 0 || cnt[1] == 0) continue;
    auto gap = [&](const std::array<Vector, 2>& sums) {
      double s = 0.0;
      for (std::size_t c = 0; c < dim; ++c) {
        const double diff = sums[1][c] / static_cast<double>(cnt[1]) - sums[0][c] / static_cast<double>(cnt[0]);
        s += diff * diff;
      }
      return std::sqrt(s);
    };
    out.push_back({label, gap(sums_before.at(label)), gap(sums_after.at(label))});
  }
  return out;
}

/// Evaluates base and gated models on the test split of `truth`.
inline Evaluation evaluate(const PipelineConfig& cfg, const Dataset& truth, const BaseModel& model, const Gate& gate,
                           std::span<const AdapterUnit> units, Variant variant, double tau) {
  const auto test = truth.indices(Split::test);
  require(!test.empty(), "empty_split", "test split is empty");
  Evaluation ev;
  ev.tau = tau;
  const Vector scores = gate_scores(model, gate, truth, test, truth.sensitive);
  std::vector<Sensitive> groups;
  std::vector<std::size_t> labels;
  for (std::size_t i : test) {
    groups.push_back(truth.sensitive[i]);
    labels.push_back(truth.labels[i]);
  }
  ev.rates = evaluate_rates(scores, groups, tau);

  const std::size_t layer = cfg.adapter.layer;
  std::vector<Vector> rep_before, rep_after;
  std::vector<std::size_t> lora_preds;
  const std::vector<bool> all_open(units.size(), true);
  for (std::size_t r = 0; r < test.size(); ++r) {
    const auto x = truth.row(test[r]);
    const bool fire = uses_detector(variant) ? scores[r] > tau : true;
    ev.fired.push_back(fire);
    const ForwardTrace base = forward(model, x);
    ev.base_preds.push_back(argmax(base.logits()));
    const ForwardTrace lora = conditional_forward(model, units, x, all_open);
    lora_preds.push_back(argmax(lora.logits()));
    const ForwardTrace& gated = fire ? lora : base;
    ev.fairnet_preds.push_back(argmax(gated.logits()));
    rep_before.push_back(base.representation(layer));
    rep_after.push_back(gated.representation(layer));
  }
  ev.base = evaluate_fairness(ev.base_preds, labels, groups);
  ev.fairnet = evaluate_fairness(ev.fairnet_preds, labels, groups);
  ev.alignment = alignment_gaps(rep_before, rep_after, labels, groups);

  // Theory bridge: measured inputs versus the closed-form prediction.
  TheoryBridge& tb = ev.theory;
  std::size_t minority = 0;
  for (Sensitive s : groups) minority += s == Sensitive::minority ? 1 : 0;
  tb.inputs.p = static_cast<double>(minority) / static_cast<double>(groups.size());
  tb.inputs.perf_base = ev.base.group_acc;
  tb.inputs.perf_lora = group_accuracy(lora_preds, labels, groups);
  if (uses_detector(variant)) {
    tb.inputs.tpr = ev.rates.tpr;
    tb.inputs.fpr = ev.rates.fpr;
  } else {
    tb.inputs.tpr = 1.0;
    tb.inputs.fpr = 1.0;
  }
  tb.predicted = predicted_group_perf(tb.inputs);
  tb.measured = ev.fairnet.group_acc;
  tb.predicted_delta_p = delta_p(tb.inputs);
  tb.measured_delta_p = (1.0 - tb.inputs.p) * (tb.measured[0] - tb.inputs.perf_base[0]) +
                        tb.inputs.p * (tb.measured[1] - tb.inputs.perf_base[1]);
  tb.condition = preservation_condition(tb.inputs);
  tb.monte_carlo = monte_carlo_validate(tb.inputs, std::max<std::size_t>(cfg.monte_carlo_samples, 1),
                                        derive_seed(cfg.seed, seed_offset::monte_carlo));
  return ev;
}

// ---------------------------------------------------------------------------
// Orchestration

/// Holds stage artifacts and enforces stage order.
class Pipeline {
 public:
  explicit Pipeline(PipelineConfig cfg) : cfg_(std::move(cfg)) { validate(cfg_); }

  const PipelineConfig& config() const { return cfg_; }

  const PreparedData& prepare() {
    data_ = prepare_data(cfg_);
    return *data_;
  }

  const Stage1Result& stage1() {
    require(data_.has_value(), "missing_prerequisite", "stage 1 requires prepared data");
    stage1_ = run_stage1(cfg_, *data_);
    return *stage1_;
  }

  const Stage2Result& stage2() {
    require(stage1_.has_value(), "missing_prerequisite", "stage 2 requires the stage-1 model");
    stage2_ = run_stage2(cfg_, *data_, stage1_->model);
    return *stage2_;
  }

  const TargetBank& stage3() {
    require(stage2_.has_value(), "missing_prerequisite", "stage 3 requires the stage-2 gate");
    stage3_ = run_stage3(cfg_, *data_, stage1_->model, *stage2_);
    return *stage3_;
  }

  const Stage4Result& stage4(Variant variant) {
    require(stage3_.has_value(), "missing_prerequisite", "stage 4 requires the stage-3 target bank");
    stage4_ = run_stage4(cfg_, *data_, stage1_->model, *stage2_, *stage3_, variant);
    variant_ = variant;
    return *stage4_;
  }

  Evaluation evaluate_at(double tau) const {
    require(stage4_.has_value(), "missing_prerequisite", "evaluation requires trained adapters");
    return evaluate(cfg_, data_->truth, stage1_->model, stage2_->gate, stage4_->units, variant_, tau);
  }

  const PreparedData& data() const { return *data_; }
  const Stage1Result& stage1_result() const { return *stage1_; }
  const Stage2Result& stage2_result() const { return *stage2_; }
  const TargetBank& stage3_result() const { return *stage3_; }
  const Stage4Result& stage4_result() const { return *stage4_; }

  /// Replaces prepared data and later stages, keeping stage 1 (used by
  /// label-fraction and noise sweeps).
  void reprepare(double label_fraction, double noise_rate) {
    data_ = prepare_data(cfg_, label_fraction, noise_rate);
    stage2_.reset();
    stage3_.reset();
    stage4_.reset();
  }

 private:
  PipelineConfig cfg_;
  std::optional<PreparedData> data_;
  std::optional<Stage1Result> stage1_;
  std::optional<Stage2Result> stage2_;
  std::optional<TargetBank> stage3_;
  std::optional<Stage4Result> stage4_;
  Variant variant_ = Variant::full_method;
};

struct RunResult {
  PipelineConfig config;
  Variant variant = Variant::full_method;
  Stage1Result stage1;
  Stage2Result stage2;
  Stage4Result stage4;
  Evaluation evaluation;
  Overhead overhead;
};

inline RunResult collect(const Pipeline& p, Variant variant) {
  RunResult r;
  r.config = p.config();
  r.variant = variant;
  r.stage1 = p.stage1_result();
  r.stage2 = p.stage2_result();
  r.stage4 = p.stage4_result();
  r.evaluation = p.evaluate_at(p.config().detector.spec.threshold);
  std::vector<BiasDetector> detectors;
  if (r.stage2.gate.detector && uses_detector(variant)) detectors.push_back(*r.stage2.gate.detector);
  r.overhead = count_overhead(r.stage1.model, r.stage4.units, detectors);
  return r;
}

inline RunResult run_experiment(const PipelineConfig& cfg) {
  Pipeline p(cfg);
  p.prepare();
  p.stage1();
  p.stage2();
  p.stage3();
  p.stage4(cfg.variant);
  return collect(p, cfg.variant);
}

inline RunResult run_ablation(PipelineConfig cfg, Variant variant) {
  cfg.variant = variant;
  return run_experiment(cfg);
}

/// Runs several variants sharing stages 1-3; each result equals a separate
/// run_ablation with the same configuration.
inline std::vector<RunResult> run_variants(const PipelineConfig& cfg, std::span<const Variant> variants) {
  Pipeline p(cfg);
  p.prepare();
  p.stage1();
  p.stage2();
  p.stage3();
  std::vector<RunResult> out;
  for (Variant v : variants) {
    p.stage4(v);
    out.push_back(collect(p, v));
    out.back().config.variant = v;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Sweeps

enum class SweepAxis { threshold, label_fraction, noise_rate };

inline SweepAxis parse_sweep_axis(std::string_view s) {
  if (s == "threshold") return SweepAxis::threshold;
  if (s == "label_fraction") return SweepAxis::label_fraction;
  if (s == "noise_rate" || s == "noise") return SweepAxis::noise_rate;
  throw Error("invalid_argument", "unknown sweep axis '" + std::string(s) + "'");
}

inline std::string_view to_string(SweepAxis a) {
  switch (a) {
    case SweepAxis::threshold: return "threshold";
    case SweepAxis::label_fraction: return "label_fraction";
    case SweepAxis::noise_rate: return "noise_rate";
  }
  return "threshold";
}

struct SweepRow {
  double value = 0.0;
  DetectorRates rates;
  FairnessReport metrics;
  FairnessReport base;
};

/// One evaluation per value. Threshold sweeps reuse every trained artifact;
/// label-fraction and noise sweeps share stage 1 and retrain stages 2-4.
/// Points run on up to `jobs` threads; rows come back in input order and do
/// not depend on `jobs`.
inline std::vector<SweepRow> sweep(const PipelineConfig& cfg, SweepAxis axis, std::span<const double> values,
                                   std::size_t jobs = 1) {
  for (double v : values) require(v >= 0.0 && v <= 1.0, "invalid_argument", "sweep values must lie in [0, 1]");
  if (axis == SweepAxis::label_fraction) {
    require(cfg.mode == Mode::partial, "invalid_argument", "label_fraction sweeps need partial mode");
  }
  if (axis == SweepAxis::noise_rate) {
    require(cfg.mode != Mode::unlabeled && (cfg.mode == Mode::partial || cfg.detector.kind == GateKind::trained),
            "invalid_argument", "noise sweeps need a detector trained on sensitive labels");
  }
  Pipeline shared(cfg);
  shared.prepare();
  shared.stage1();
  if (axis == SweepAxis::threshold) {
    shared.stage2();
    shared.stage3();
    shared.stage4(cfg.variant);
  }

  std::vector<SweepRow> rows(values.size());
  auto run_point = [&](std::size_t k) {
    const double v = values[k];
    Evaluation ev;
    if (axis == SweepAxis::threshold) {
      ev = shared.evaluate_at(v);
    } else {
      Pipeline local = shared;
      local.reprepare(axis == SweepAxis::label_fraction ? v : cfg.label_fraction,
                      axis == SweepAxis::noise_rate ? v : cfg.noise_rate);
      local.stage2();
      local.stage3();
      local.stage4(cfg.variant);
      ev = local.evaluate_at(cfg.detector.spec.threshold);
    }
    rows[k] = {v, ev.rates, ev.fairnet, ev.base};
  };

  const std::size_t workers = std::max<std::size_t>(1, std::min(jobs, values.size()));
  if (workers == 1) {
    for (std::size_t k = 0; k < values.size(); ++k) run_point(k);
    return rows;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(values.size());
  std::vector<std::thread> threads;
  for (std::size_t w = 0; w < workers; ++w) {
    threads.emplace_back([&] {
      for (std::size_t k = next++; k < values.size(); k = next++) {
        try {
          run_point(k);
        } catch (...) {
          errors[k] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : threads) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return rows;
}

}  // namespace fairgate
