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

// Subcommand implementations shared by the command-line tool and tests.
// Every command writes its outputs under one directory and finishes with a
// manifest.json listing each artifact with its SHA-256.

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "fairgate/checkpoint.hpp"
#include "fairgate/config.hpp"
#include "fairgate/pipeline.hpp"
#include "fairgate/report.hpp"
#include "fairgate/theory.hpp"

namespace fairgate {

namespace fs = std::filesystem;

class OutputDir {
 public:
  explicit OutputDir(fs::path root) : root_(std::move(root)) {
    std::error_code ec;
    fs::create_directories(root_, ec);
    require(!ec, "io_error", "cannot create output directory '" + root_.string() + "'");
  }

  const fs::path& root() const { return root_; }

  void write(const std::string& name, const std::string& bytes) {
    const fs::path path = root_ / name;
    {
      std::ofstream out(path, std::ios::binary);
      require(out.good(), "io_error", "cannot write '" + path.string() + "'");
      out << bytes;
      require(out.good(), "io_error", "failed writing '" + path.string() + "'");
    }
    require(read_file(path) == bytes, "io_error", "verification failed for '" + path.string() + "'");
    artifacts_.push_back({name, bytes});
  }

  /// Writes manifest.json covering everything written so far.
  void finish() {
    Json list = Json::array();
    for (const auto& [name, bytes] : artifacts_) {
      list.push_back({{"path", name}, {"bytes", bytes.size()}, {"sha256", sha256_hex(bytes)}});
    }
    Json manifest;
    manifest["artifacts"] = list;
    const std::string text = manifest.dump(2) + "\n";
    std::ofstream out(root_ / "manifest.json", std::ios::binary);
    out << text;
    require(out.good(), "io_error", "cannot write manifest.json");
  }

  static std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "io_error", "cannot open '" + path.string() + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
  }

 private:
  fs::path root_;
  std::vector<std::pair<std::string, std::string>> artifacts_;
};

inline Checkpoint make_checkpoint(const RunResult& r) {
  Checkpoint c;
  c.model = r.stage1.model;
  c.units = r.stage4.units;
  if (r.stage2.gate.kind == GateKind::trained) {
    c.detector = r.stage2.gate.detector;
  } else {
    c.switch_attribute = 0;
  }
  c.bank = r.stage4.bank;
  return c;
}

inline std::string checkpoint_text(const Checkpoint& c) {
  std::ostringstream out;
  write_checkpoint(out, c);
  return out.str();
}

/// Trains all four stages; writes report.json, summary.txt and checkpoint.txt.
inline RunResult cmd_train(const PipelineConfig& cfg, const fs::path& out_dir) {
  const RunResult r = run_experiment(cfg);
  OutputDir out(out_dir);
  out.write("report.json", report_text(r));
  out.write("summary.txt", summary_text(r));
  out.write("checkpoint.txt", checkpoint_text(make_checkpoint(r)));
  out.finish();
  return r;
}

/// Re-evaluates saved artifacts on the test split the config defines.
inline Evaluation cmd_evaluate(const PipelineConfig& cfg, const fs::path& checkpoint, const fs::path& out_dir) {
  const Checkpoint c = load_checkpoint(checkpoint.string());
  require(c.model.has_value(), "invalid_checkpoint", "checkpoint holds no base model");
  Gate gate;
  if (c.detector) {
    gate.kind = GateKind::trained;
    gate.detector = c.detector;
  } else {
    require(c.switch_attribute.has_value(), "invalid_checkpoint", "checkpoint holds neither detector nor switch");
    gate.kind = GateKind::ground_truth_switch;
  }
  const PreparedData data = prepare_data(cfg);
  const Evaluation ev = evaluate(cfg, data.truth, *c.model, gate, c.units, cfg.variant, cfg.detector.spec.threshold);
  OutputDir out(out_dir);
  Json doc;
  doc["format"] = "fairgate-evaluation 1";
  doc["config_sha256"] = config_hash(cfg);
  doc["checkpoint_sha256"] = sha256_hex(OutputDir::read_file(checkpoint));
  doc["evaluation"] = to_json(ev);
  out.write("evaluation.json", doc.dump(2) + "\n");
  out.finish();
  return ev;
}

inline std::string csv_cell(const MaybeRate& r) {
  if (!r) return "";
  Json j = *r;
  return j.dump();
}

inline std::string sweep_csv(SweepAxis axis, std::span<const SweepRow> rows) {
  std::string s = std::string(to_string(axis)) + ",tpr,fpr,ratio,acc,wga,eod\n";
  for (const auto& r : rows) {
    s += Json(r.value).dump() + ',' + Json(r.rates.tpr).dump() + ',' + Json(r.rates.fpr).dump() + ',' +
         csv_cell(r.rates.ratio) + ',' + Json(r.metrics.acc).dump() + ',' + Json(r.metrics.wga).dump() + ',' +
         csv_cell(r.metrics.eod) + '\n';
  }
  return s;
}

inline std::vector<SweepRow> cmd_sweep(const PipelineConfig& cfg, SweepAxis axis, std::span<const double> values,
                                       std::size_t jobs, const fs::path& out_dir) {
  require(!values.empty(), "invalid_argument", "sweep needs at least one value");
  const auto rows = sweep(cfg, axis, values, jobs);
  OutputDir out(out_dir);
  out.write("sweep.csv", sweep_csv(axis, rows));
  out.finish();
  return rows;
}

/// Runs the named variants on shared stages 1-3 and writes one report per
/// variant plus ablation.csv.
inline std::vector<RunResult> cmd_ablate(const PipelineConfig& cfg, std::span<const Variant> variants,
                                         const fs::path& out_dir) {
  require(!variants.empty(), "invalid_argument", "ablation needs at least one variant");
  const auto results = run_variants(cfg, variants);
  OutputDir out(out_dir);
  std::string csv = "variant,acc,wga,eod,tpr,fpr\n";
  for (const auto& r : results) {
    out.write("report_" + std::string(to_string(r.variant)) + ".json", report_text(r));
    const auto& f = r.evaluation.fairnet;
    csv += std::string(to_string(r.variant)) + ',' + Json(f.acc).dump() + ',' + Json(f.wga).dump() + ',' +
           csv_cell(f.eod) + ',' + Json(r.evaluation.rates.tpr).dump() + ',' + Json(r.evaluation.rates.fpr).dump() +
           '\n';
  }
  const auto& base = results.front().evaluation.base;
  csv += "erm," + Json(base.acc).dump() + ',' + Json(base.wga).dump() + ',' + csv_cell(base.eod) + ",,\n";
  out.write("ablation.csv", csv);
  out.finish();
  return results;
}

inline TheoryInputs theory_inputs_from_json(const Json& doc) {
  require(doc.is_object(), "invalid_input", "theory inputs must be a JSON object");
  static const std::set<std::string> keys = {"p", "perf_base", "perf_lora", "tpr", "fpr"};
  for (const auto& [key, value] : doc.items()) {
    require(keys.count(key) > 0, "invalid_input", "unknown key '" + key + "'");
  }
  for (const auto& key : keys) require(doc.contains(key), "invalid_input", "missing key '" + key + "'");
  TheoryInputs in;
  try {
    in.p = doc.at("p").get<double>();
    in.perf_base = doc.at("perf_base").get<std::array<double, 2>>();
    in.perf_lora = doc.at("perf_lora").get<std::array<double, 2>>();
    in.tpr = doc.at("tpr").get<double>();
    in.fpr = doc.at("fpr").get<double>();
  } catch (const Json::exception&) {
    throw Error("invalid_input", "theory inputs have the wrong shape");
  }
  in.validate();
  return in;
}

/// Closed forms, preservation condition and a Monte Carlo check.
inline Json cmd_theory(const TheoryInputs& in, std::size_t samples, std::uint64_t seed, const fs::path& out_dir) {
  in.validate();
  Json doc;
  doc["format"] = "fairgate-theory 1";
  doc["inputs"] = to_json(in);
  doc["predicted_group_perf"] = predicted_group_perf(in);
  doc["delta_p"] = delta_p(in);
  doc["condition"] = to_json(preservation_condition(in));
  doc["monte_carlo"] = to_json(monte_carlo_validate(in, samples, seed));
  OutputDir out(out_dir);
  out.write("theory.json", doc.dump(2) + "\n");
  out.finish();
  return doc;
}

/// Writes the configured synthetic dataset, with splits, as data.csv.
inline Dataset cmd_gen_data(const PipelineConfig& cfg, const fs::path& out_dir) {
  require(cfg.data.source == "synthetic", "invalid_config", "gen-data needs data.source = synthetic");
  const Dataset ds = prepare_data(cfg).truth;
  std::ostringstream csv;
  write_csv(csv, ds);
  OutputDir out(out_dir);
  out.write("data.csv", csv.str());
  out.finish();
  return ds;
}

}  // namespace fairgate
