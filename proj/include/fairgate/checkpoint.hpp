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

// Line-oriented text checkpoints. Every double is written with 17
// significant digits so a save/load round trip is exact.
//
//   fairgate-checkpoint 1
//   model <classes> <depth>
//   layer <in> <out> <activation>
//   <out*in weights> / <out biases>
//   adapter <attribute> <layer> <rank> <in> <out>
//   <rank*in down> / <out*rank up>
//   detector <attribute> <layer> <pooling> <threshold> <in> <hidden> <attn_dim>
//   [<attn proj> / <attn bias> / <attn query>] <hidden layer> <output layer>
//   switch <attribute>
//   bank <layer> <classes> <dim>
//   positive <class> <values...> / negative <class> <values...>
//   end

#include <charconv>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "fairgate/contrastive.hpp"
#include "fairgate/detector.hpp"
#include "fairgate/error.hpp"
#include "fairgate/fairlora.hpp"
#include "fairgate/model.hpp"

namespace fairgate {

struct Checkpoint {
  std::optional<BaseModel> model;
  std::vector<AdapterUnit> units;
  std::optional<BiasDetector> detector;
  std::optional<int> switch_attribute;  // ground-truth gate instead of a detector
  std::optional<TargetBank> bank;

  bool operator==(const Checkpoint&) const = default;
};

namespace detail {

inline void write_values(std::ostream& out, std::span<const double> values) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i > 0) out << ' ';
    out << format_double(values[i]);
  }
  out << '\n';
}

inline void write_layer(std::ostream& out, const DenseLayer& l) {
  out << "layer " << l.spec.in_dim << ' ' << l.spec.out_dim << ' ' << to_string(l.spec.activation) << '\n';
  write_values(out, l.weight.values);
  write_values(out, l.bias);
}

class CheckpointReader {
 public:
  explicit CheckpointReader(std::istream& in) : in_(in) {}

  std::vector<std::string> header() {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_no_;
      if (!line.empty()) break;
    }
    std::istringstream ss(line);
    std::vector<std::string> words;
    for (std::string w; ss >> w;) words.push_back(w);
    return words;
  }

  Vector values(std::size_t expected) {
    std::string line;
    require(static_cast<bool>(std::getline(in_, line)), "malformed_checkpoint", where("missing value line"));
    ++line_no_;
    Vector out;
    out.reserve(expected);
    const char* p = line.data();
    const char* end = line.data() + line.size();
    while (p < end) {
      while (p < end && *p == ' ') ++p;
      if (p == end) break;
      double v = 0.0;
      const auto [next, ec] = std::from_chars(p, end, v);
      require(ec == std::errc(), "malformed_checkpoint", where("non-numeric value"));
      out.push_back(v);
      p = next;
    }
    require(out.size() == expected, "malformed_checkpoint",
            where("expected " + std::to_string(expected) + " values, got " + std::to_string(out.size())));
    return out;
  }

  DenseLayer layer() {
    const auto w = header();
    require(w.size() == 4 && w[0] == "layer", "malformed_checkpoint", where("expected layer record"));
    DenseLayer l;
    l.spec = {to_size(w[1]), to_size(w[2]), parse_activation(w[3])};
    l.weight = Matrix(l.spec.out_dim, l.spec.in_dim);
    l.weight.values = values(l.spec.out_dim * l.spec.in_dim);
    l.bias = values(l.spec.out_dim);
    return l;
  }

  std::size_t to_size(const std::string& s) {
    std::size_t v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    require(ec == std::errc() && p == s.data() + s.size(), "malformed_checkpoint", where("bad integer '" + s + "'"));
    return v;
  }

  int to_int(const std::string& s) {
    int v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    require(ec == std::errc() && p == s.data() + s.size(), "malformed_checkpoint", where("bad integer '" + s + "'"));
    return v;
  }

  double to_double(const std::string& s) {
    double v = 0.0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    require(ec == std::errc() && p == s.data() + s.size(), "malformed_checkpoint", where("bad number '" + s + "'"));
    return v;
  }

  std::string where(const std::string& what) const { return "checkpoint line " + std::to_string(line_no_) + ": " + what; }

 private:
  std::istream& in_;
  std::size_t line_no_ = 0;
};

}  // namespace detail

inline void write_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
  using detail::write_values;
  out << "fairgate-checkpoint 1\n";
  if (ckpt.model) {
    out << "model " << ckpt.model->class_count << ' ' << ckpt.model->depth() << ' '
        << (ckpt.model->frozen ? "frozen" : "trainable") << '\n';
    for (const auto& l : ckpt.model->layers) detail::write_layer(out, l);
  }
  for (const auto& u : ckpt.units) {
    const auto& a = u.adapter;
    out << "adapter " << u.attribute_id << ' ' << a.target_layer << ' ' << a.rank() << ' ' << a.down.cols << ' '
        << a.up.rows << '\n';
    write_values(out, a.down.values);
    write_values(out, a.up.values);
  }
  if (ckpt.detector) {
    const auto& d = *ckpt.detector;
    out << "detector " << d.attribute_id << ' ' << d.layer << ' ' << to_string(d.pooling) << ' '
        << detail::format_double(d.threshold) << ' ' << d.input_dim() << ' ' << d.hidden.spec.out_dim << ' '
        << d.attention.proj.rows << '\n';
    if (d.pooling == Pooling::attention) {
      write_values(out, d.attention.proj.values);
      write_values(out, d.attention.bias);
      write_values(out, d.attention.query);
    }
    detail::write_layer(out, d.hidden);
    detail::write_layer(out, d.output);
  }
  if (ckpt.switch_attribute) out << "switch " << *ckpt.switch_attribute << '\n';
  if (ckpt.bank) {
    const auto& b = *ckpt.bank;
    const std::size_t dim = b.negative_targets.empty() ? 0 : b.negative_targets.begin()->second.size();
    out << "bank " << b.layer << ' ' << b.negative_targets.size() << ' ' << dim << '\n';
    for (const auto& [cls, v] : b.positive_targets) {
      out << "positive " << cls << '\n';
      write_values(out, v);
    }
    for (const auto& [cls, v] : b.negative_targets) {
      out << "negative " << cls << '\n';
      write_values(out, v);
    }
  }
  out << "end\n";
}

inline Checkpoint read_checkpoint(std::istream& in) {
  detail::CheckpointReader r(in);
  auto w = r.header();
  require(w.size() == 2 && w[0] == "fairgate-checkpoint" && w[1] == "1", "malformed_checkpoint",
          r.where("unsupported checkpoint header"));
  Checkpoint ckpt;
  std::size_t bank_dim = 0;
  while (true) {
    w = r.header();
    require(!w.empty(), "malformed_checkpoint", r.where("unexpected end of file"));
    const std::string& kind = w[0];
    if (kind == "end") break;
    if (kind == "model" && w.size() == 4 && (w[3] == "frozen" || w[3] == "trainable")) {
      BaseModel m;
      m.class_count = r.to_size(w[1]);
      m.frozen = w[3] == "frozen";
      const std::size_t depth = r.to_size(w[2]);
      for (std::size_t l = 0; l < depth; ++l) m.layers.push_back(r.layer());
      m.validate();
      ckpt.model = std::move(m);
    } else if (kind == "adapter" && w.size() == 6) {
      AdapterUnit u;
      u.attribute_id = r.to_int(w[1]);
      u.adapter.target_layer = r.to_size(w[2]);
      const std::size_t rank = r.to_size(w[3]), in_dim = r.to_size(w[4]), out_dim = r.to_size(w[5]);
      u.adapter.down = Matrix(rank, in_dim);
      u.adapter.down.values = r.values(rank * in_dim);
      u.adapter.up = Matrix(out_dim, rank);
      u.adapter.up.values = r.values(out_dim * rank);
      ckpt.units.push_back(std::move(u));
    } else if (kind == "detector" && w.size() == 8) {
      BiasDetector d;
      d.attribute_id = r.to_int(w[1]);
      d.layer = r.to_size(w[2]);
      d.pooling = parse_pooling(w[3]);
      d.threshold = r.to_double(w[4]);
      const std::size_t in_dim = r.to_size(w[5]), attn = r.to_size(w[7]);
      if (d.pooling == Pooling::attention) {
        d.attention.proj = Matrix(attn, in_dim);
        d.attention.proj.values = r.values(attn * in_dim);
        d.attention.bias = r.values(attn);
        d.attention.query = r.values(attn);
      }
      d.hidden = r.layer();
      d.output = r.layer();
      ckpt.detector = std::move(d);
    } else if (kind == "switch" && w.size() == 2) {
      ckpt.switch_attribute = r.to_int(w[1]);
    } else if (kind == "bank" && w.size() == 4) {
      TargetBank b;
      b.layer = r.to_size(w[1]);
      bank_dim = r.to_size(w[3]);
      ckpt.bank = std::move(b);
    } else if ((kind == "positive" || kind == "negative") && w.size() == 2 && ckpt.bank) {
      auto& target = kind == "positive" ? ckpt.bank->positive_targets : ckpt.bank->negative_targets;
      target[r.to_size(w[1])] = r.values(bank_dim);
    } else {
      throw Error("malformed_checkpoint", r.where("unknown record '" + kind + "'"));
    }
  }
  return ckpt;
}

inline void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), "io_error", "cannot write " + path);
  write_checkpoint(out, ckpt);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "io_error", "cannot open " + path);
  return read_checkpoint(in);
}

}  // namespace fairgate
