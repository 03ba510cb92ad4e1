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

// Run reports as JSON, plus content hashing for configs and artifacts.

#include <array>
#include <cstdio>
#include <string>
#include <string_view>

#include <openssl/evp.h>

#include "fairgate/config.hpp"
#include "fairgate/pipeline.hpp"

namespace fairgate {

inline std::string sha256_hex(std::string_view bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  require(EVP_Digest(bytes.data(), bytes.size(), digest.data(), &len, EVP_sha256(), nullptr) == 1, "io_error",
          "sha-256 failed");
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 0xF];
  }
  return out;
}

inline std::string config_hash(const PipelineConfig& cfg) { return sha256_hex(to_json(cfg).dump()); }

inline Json maybe(const MaybeRate& r) { return r ? Json(*r) : Json(nullptr); }

inline Json to_json(const FairnessReport& r) {
  return {{"acc", r.acc},   {"group_acc", r.group_acc}, {"wga", r.wga},
          {"eod", maybe(r.eod)}, {"dp", maybe(r.dp)},       {"eop", maybe(r.eop)}};
}

inline Json to_json(const DetectorRates& r) { return {{"tpr", r.tpr}, {"fpr", r.fpr}, {"ratio", maybe(r.ratio)}}; }

inline Json to_json(const TheoryInputs& in) {
  return {{"p", in.p},     {"perf_base", in.perf_base}, {"perf_lora", in.perf_lora},
          {"tpr", in.tpr}, {"fpr", in.fpr}};
}

inline Json to_json(const ConditionResult& c) {
  return {{"rhs", maybe(c.rhs)}, {"ratio", maybe(c.ratio)}, {"status", to_string(c.status)}, {"reason", c.reason}};
}

inline Json to_json(const MonteCarloEstimate& m) {
  return {{"samples", m.samples},       {"group_counts", m.group_counts}, {"group_perf", m.group_perf},
          {"group_se", m.group_se},     {"delta_p", m.delta_p},           {"delta_p_se", m.delta_p_se}};
}

inline Json to_json(const TheoryBridge& t) {
  return {{"inputs", to_json(t.inputs)},
          {"predicted_group_perf", t.predicted},
          {"measured_group_perf", t.measured},
          {"predicted_delta_p", t.predicted_delta_p},
          {"measured_delta_p", t.measured_delta_p},
          {"condition", to_json(t.condition)},
          {"monte_carlo", to_json(t.monte_carlo)}};
}

inline Json to_json(const Overhead& o) {
  return {{"params_base", o.params_base},
          {"params_added", o.params_added},
          {"flops_per_sample_base", o.flops_per_sample_base},
          {"flops_per_sample_untriggered", o.flops_per_sample_untriggered},
          {"flops_per_sample_triggered", o.flops_per_sample_triggered}};
}

inline Json to_json(const Evaluation& ev) {
  Json alignment = Json::array();
  for (const auto& a : ev.alignment) alignment.push_back({{"label", a.label}, {"before", a.before}, {"after", a.after}});
  std::size_t fired = 0;
  for (bool f : ev.fired) fired += f ? 1 : 0;
  return {{"threshold", ev.tau},
          {"test_samples", ev.fired.size()},
          {"triggered", fired},
          {"base", to_json(ev.base)},
          {"corrected", to_json(ev.fairnet)},
          {"detector", to_json(ev.rates)},
          {"alignment", alignment},
          {"theory", to_json(ev.theory)}};
}

inline Json report_json(const RunResult& r) {
  Json stages;
  stages["base_model"] = {{"best_epoch", r.stage1.best_epoch}, {"val_accuracy", r.stage1.val_accuracy}};
  stages["detector"] = {{"kind", to_string(r.stage2.gate.kind)},
                        {"pseudo_label_quality", r.stage2.pseudo_label_quality
                                                     ? to_json(*r.stage2.pseudo_label_quality)
                                                     : Json(nullptr)}};
  stages["adapters"] = {{"anchors", r.stage4.anchors}, {"epoch_losses", r.stage4.epoch_losses}};
  Json out;
  out["format"] = "fairgate-report 1";
  out["variant"] = to_string(r.variant);
  out["config_sha256"] = config_hash(r.config);
  out["config"] = to_json(r.config);
  out["stages"] = stages;
  out["evaluation"] = to_json(r.evaluation);
  out["overhead"] = to_json(r.overhead);
  return out;
}

inline std::string report_text(const RunResult& r) { return report_json(r).dump(2) + "\n"; }

inline std::string percent(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", 100.0 * fraction);
  return buf;
}

inline std::string percent(const MaybeRate& r) { return r ? percent(*r) : std::string("undefined"); }

/// Human-readable one-screen summary.
inline std::string summary_text(const RunResult& r) {
  const Evaluation& ev = r.evaluation;
  std::string s;
  s += "variant " + std::string(to_string(r.variant)) + ", mode " + std::string(to_string(r.config.mode)) + "\n";
  s += "          ACC    WGA    EOD\n";
  auto row = [&](const char* name, const FairnessReport& f) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "%-8s %5s  %5s  %5s\n", name, percent(f.acc).c_str(), percent(f.wga).c_str(),
                  percent(f.eod).c_str());
    s += buf;
  };
  row("base", ev.base);
  row("gated", ev.fairnet);
  s += "detector TPR " + percent(ev.rates.tpr) + " FPR " + percent(ev.rates.fpr) + "\n";
  return s;
}

}  // namespace fairgate
