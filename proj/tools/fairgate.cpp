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

// fairgate: command-line front end.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fairgate/cli.hpp"

namespace {

struct Common {
  std::string config;
  std::string out = "out";
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, Common& c, bool needs_config = true) {
  auto* opt = cmd->add_option("--config", c.config, "JSON configuration file");
  if (needs_config) opt->check(CLI::ExistingFile);
  cmd->add_option("--out", c.out, "output directory")->capture_default_str();
  cmd->add_option("--seed", c.seed, "master seed override");
}

fairgate::PipelineConfig resolve(const Common& c) {
  fairgate::PipelineConfig cfg = c.config.empty() ? fairgate::PipelineConfig{} : fairgate::load_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Detector-gated low-rank fairness correction"};
  app.require_subcommand(1);

  Common common;
  std::string checkpoint;
  std::string axis;
  std::vector<double> values;
  std::size_t jobs = 1;
  std::vector<std::string> variants;
  std::string inputs;
  std::size_t samples = 1000000;

  auto* train = app.add_subcommand("train", "run all four stages and write a report");
  add_common(train, common);

  auto* evaluate = app.add_subcommand("evaluate", "evaluate a saved checkpoint on the test split");
  add_common(evaluate, common);
  evaluate->add_option("--checkpoint", checkpoint, "checkpoint written by train")->required()->check(CLI::ExistingFile);

  auto* sweep = app.add_subcommand("sweep", "evaluate along one axis and write sweep.csv");
  add_common(sweep, common);
  sweep->add_option("--axis", axis, "threshold, label_fraction or noise_rate")->required();
  sweep->add_option("--values", values, "axis values in [0, 1]")->required();
  sweep->add_option("--jobs", jobs, "worker threads")->capture_default_str();

  auto* ablate = app.add_subcommand("ablate", "train ablation variants on shared stages");
  add_common(ablate, common);
  ablate->add_option("--variant", variants, "full_method, no_detector, no_contrastive, neither or all")
      ->default_val(std::vector<std::string>{"all"});

  auto* theory = app.add_subcommand("theory", "closed forms and Monte Carlo from a JSON inputs file");
  theory->add_option("--inputs", inputs, "JSON with p, perf_base, perf_lora, tpr, fpr")
      ->required()
      ->check(CLI::ExistingFile);
  theory->add_option("--out", common.out, "output directory")->capture_default_str();
  theory->add_option("--seed", common.seed, "Monte Carlo seed");
  theory->add_option("--samples", samples, "Monte Carlo samples")->capture_default_str();

  auto* gen = app.add_subcommand("gen-data", "write the configured synthetic dataset as CSV");
  add_common(gen, common);

  auto* reference = app.add_subcommand("config-reference", "print every config key with its default");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::fprintf(stderr, "error: usage: %s\n", e.what());
    return 1;
  }

  try {
    namespace fg = fairgate;
    if (*train) {
      const auto r = fg::cmd_train(resolve(common), common.out);
      std::cout << fg::summary_text(r);
    } else if (*evaluate) {
      const auto ev = fg::cmd_evaluate(resolve(common), checkpoint, common.out);
      std::cout << "ACC " << fg::percent(ev.fairnet.acc) << " WGA " << fg::percent(ev.fairnet.wga) << " EOD "
                << fg::percent(ev.fairnet.eod) << '\n';
    } else if (*sweep) {
      const auto rows = fg::cmd_sweep(resolve(common), fg::parse_sweep_axis(axis), values, jobs, common.out);
      std::cout << fg::sweep_csv(fg::parse_sweep_axis(axis), rows);
    } else if (*ablate) {
      std::vector<fg::Variant> chosen;
      for (const auto& v : variants) {
        if (v == "all") {
          chosen.insert(chosen.end(), {fg::Variant::full_method, fg::Variant::no_detector, fg::Variant::no_contrastive,
                                       fg::Variant::neither});
        } else {
          chosen.push_back(fg::parse_variant(v));
        }
      }
      const auto results = fg::cmd_ablate(resolve(common), chosen, common.out);
      for (const auto& r : results) std::cout << fg::summary_text(r);
    } else if (*theory) {
      const auto in = fg::theory_inputs_from_json(fg::Json::parse(fg::OutputDir::read_file(inputs), nullptr, false));
      std::cout << fg::cmd_theory(in, samples, common.seed.value_or(0), common.out).dump(2) << '\n';
    } else if (*gen) {
      const auto ds = fg::cmd_gen_data(resolve(common), common.out);
      std::cout << "wrote " << ds.size() << " rows\n";
    } else if (*reference) {
      std::cout << fg::config_reference();
    }
  } catch (const fairgate::Error& e) {
    std::fprintf(stderr, "error: %s: %s\n", e.code().c_str(), e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: internal: %s\n", e.what());
    return 1;
  }
  return 0;
}
