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

// JSON configuration. One document with sections data, model, detector,
// adapter, loss and pipeline; every key is optional and unknown keys are
// rejected.

#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include <json.hpp>

#include "fairgate/error.hpp"
#include "fairgate/pipeline.hpp"

namespace fairgate {

using Json = nlohmann::ordered_json;

namespace detail {

class SectionReader {
 public:
  SectionReader(const Json& doc, std::string name) : name_(std::move(name)) {
    if (!doc.contains(name_)) return;
    const Json& s = doc.at(name_);
    require(s.is_object(), "invalid_config", "section '" + name_ + "' must be an object");
    section_ = &s;
  }

  void finish() const {
    if (section_ == nullptr) return;
    for (const auto& [key, value] : section_->items()) {
      require(seen_.count(key) > 0, "invalid_config", "unknown key '" + name_ + "." + key + "'");
    }
  }

  template <class T>
  void read(const char* key, T& target) {
    seen_.insert(key);
    if (section_ == nullptr || !section_->contains(key)) return;
    const Json& v = section_->at(key);
    try {
      if constexpr (std::is_same_v<T, bool>) {
        require(v.is_boolean(), "invalid_config", "expected a boolean");
        target = v.get<bool>();
      } else if constexpr (std::is_integral_v<T>) {
        require(v.is_number_integer() && (v.is_number_unsigned() || v.get<std::int64_t>() >= 0), "invalid_config",
                "expected a non-negative integer");
        target = v.get<T>();
      } else if constexpr (std::is_floating_point_v<T>) {
        require(v.is_number(), "invalid_config", "expected a number");
        target = v.get<T>();
      } else {
        target = v.get<T>();
      }
    } catch (const Error& e) {
      throw Error("invalid_config", "key '" + name_ + "." + key + "': " + e.what());
    } catch (const Json::exception&) {
      throw Error("invalid_config", "key '" + name_ + "." + key + "' has the wrong type");
    }
  }

  template <class Enum, class Parse>
  void read_enum(const char* key, Enum& target, Parse parse) {
    std::string name;
    bool present = section_ != nullptr && section_->contains(key);
    read(key, name);
    if (present) target = parse(name);
  }

 private:
  std::string name_;
  const Json* section_ = nullptr;
  std::set<std::string> seen_;
};

}  // namespace detail

inline Json to_json(const PipelineConfig& c) {
  Json j;
  j["data"] = {{"source", c.data.source},
               {"path", c.data.path},
               {"n", c.data.synth.n},
               {"d", c.data.synth.d},
               {"minority_fraction", c.data.synth.minority_fraction},
               {"align", c.data.synth.align},
               {"signal_snr", c.data.synth.signal_snr},
               {"spurious_snr", c.data.synth.spurious_snr},
               {"split", c.data.split}};
  j["model"] = {{"hidden", c.model.hidden},
                {"activation", to_string(c.model.activation)},
                {"epochs", c.model_train.epochs},
                {"learning_rate", c.model_train.learning_rate},
                {"batch_size", c.model_train.batch_size}};
  j["detector"] = {{"kind", to_string(c.detector.kind)},
                   {"layer", c.detector.spec.layer},
                   {"hidden_units", c.detector.spec.hidden_units},
                   {"pooling", to_string(c.detector.spec.pooling)},
                   {"attention_dim", c.detector.spec.attention_dim},
                   {"threshold", c.detector.spec.threshold},
                   {"epochs", c.detector.train.epochs},
                   {"learning_rate", c.detector.train.learning_rate},
                   {"batch_size", c.detector.train.batch_size},
                   {"balance_classes", c.detector.train.balance_classes},
                   {"lof_k", c.detector.lof_k},
                   {"contamination", c.detector.contamination}};
  j["adapter"] = {{"layer", c.adapter.layer},
                  {"rank", c.adapter.rank},
                  {"epochs", c.adapter.train.epochs},
                  {"learning_rate", c.adapter.train.learning_rate},
                  {"batch_size", c.adapter.train.batch_size},
                  {"negatives", to_string(c.adapter.negatives)}};
  j["loss"] = {{"task", c.loss.task},
               {"detector", c.loss.detector},
               {"contrastive", c.loss.contrastive},
               {"margin", c.loss.margin}};
  j["pipeline"] = {{"mode", to_string(c.mode)},
                   {"label_fraction", c.label_fraction},
                   {"noise_rate", c.noise_rate},
                   {"variant", to_string(c.variant)},
                   {"seed", c.seed},
                   {"monte_carlo_samples", c.monte_carlo_samples}};
  return j;
}

inline PipelineConfig config_from_json(const Json& doc) {
  require(doc.is_object(), "invalid_config", "configuration must be a JSON object");
  static const std::set<std::string> sections = {"data", "model", "detector", "adapter", "loss", "pipeline"};
  for (const auto& [key, value] : doc.items()) {
    require(sections.count(key) > 0, "invalid_config", "unknown section '" + key + "'");
  }
  PipelineConfig c;
  {
    detail::SectionReader s(doc, "data");
    s.read("source", c.data.source);
    s.read("path", c.data.path);
    s.read("n", c.data.synth.n);
    s.read("d", c.data.synth.d);
    s.read("minority_fraction", c.data.synth.minority_fraction);
    s.read("align", c.data.synth.align);
    s.read("signal_snr", c.data.synth.signal_snr);
    s.read("spurious_snr", c.data.synth.spurious_snr);
    s.read("split", c.data.split);
    s.finish();
  }
  {
    detail::SectionReader s(doc, "model");
    s.read("hidden", c.model.hidden);
    s.read_enum("activation", c.model.activation, parse_activation);
    s.read("epochs", c.model_train.epochs);
    s.read("learning_rate", c.model_train.learning_rate);
    s.read("batch_size", c.model_train.batch_size);
    s.finish();
  }
  {
    detail::SectionReader s(doc, "detector");
    s.read_enum("kind", c.detector.kind, parse_gate_kind);
    s.read("layer", c.detector.spec.layer);
    s.read("hidden_units", c.detector.spec.hidden_units);
    s.read_enum("pooling", c.detector.spec.pooling, parse_pooling);
    s.read("attention_dim", c.detector.spec.attention_dim);
    s.read("threshold", c.detector.spec.threshold);
    s.read("epochs", c.detector.train.epochs);
    s.read("learning_rate", c.detector.train.learning_rate);
    s.read("batch_size", c.detector.train.batch_size);
    s.read("balance_classes", c.detector.train.balance_classes);
    s.read("lof_k", c.detector.lof_k);
    s.read("contamination", c.detector.contamination);
    s.finish();
  }
  {
    detail::SectionReader s(doc, "adapter");
    s.read("layer", c.adapter.layer);
    s.read("rank", c.adapter.rank);
    s.read("epochs", c.adapter.train.epochs);
    s.read("learning_rate", c.adapter.train.learning_rate);
    s.read("batch_size", c.adapter.train.batch_size);
    s.read_enum("negatives", c.adapter.negatives, parse_negative_strategy);
    s.finish();
  }
  {
    detail::SectionReader s(doc, "loss");
    s.read("task", c.loss.task);
    s.read("detector", c.loss.detector);
    s.read("contrastive", c.loss.contrastive);
    s.read("margin", c.loss.margin);
    s.finish();
  }
  {
    detail::SectionReader s(doc, "pipeline");
    s.read_enum("mode", c.mode, parse_mode);
    s.read("label_fraction", c.label_fraction);
    s.read("noise_rate", c.noise_rate);
    s.read_enum("variant", c.variant, parse_variant);
    s.read("seed", c.seed);
    s.read("monte_carlo_samples", c.monte_carlo_samples);
    s.finish();
  }
  validate(c);
  return c;
}

inline PipelineConfig parse_config(std::string_view text) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw Error("invalid_config", std::string("malformed JSON: ") + e.what());
  }
  return config_from_json(doc);
}

inline PipelineConfig load_config(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "io_error", "cannot open config '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

/// Every key with its default value, as a JSON document.
inline std::string config_reference() { return to_json(PipelineConfig{}).dump(2) + "\n"; }

}  // namespace fairgate
