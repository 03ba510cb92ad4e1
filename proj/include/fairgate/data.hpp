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

// Tabular datasets with a binary sensitive attribute that may be unlabeled,
// synthetic spurious-correlation generation, CSV I/O, label masking, label
// noise and stratified splitting.

#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "fairgate/error.hpp"
#include "fairgate/numerics.hpp"
#include "fairgate/rng.hpp"

namespace fairgate {

enum class Sensitive : unsigned char { majority = 0, minority = 1, unlabeled = 2 };

inline bool is_labeled(Sensitive s) { return s != Sensitive::unlabeled; }
inline Sensitive sensitive_from_bit(int bit) { return bit != 0 ? Sensitive::minority : Sensitive::majority; }
inline int group_index(Sensitive s) { return s == Sensitive::minority ? 1 : 0; }

enum class Split : unsigned char { train = 0, val = 1, test = 2 };

inline std::string_view to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "train";
}

struct Dataset {
  Matrix features;  // n x d
  std::vector<std::size_t> labels;
  std::vector<Sensitive> sensitive;
  std::vector<Split> split;

  std::size_t size() const { return labels.size(); }
  std::size_t dim() const { return features.cols; }
  std::span<const double> row(std::size_t i) const { return features.row(i); }

  std::size_t class_count() const {
    std::size_t c = 0;
    for (std::size_t y : labels) c = std::max(c, y + 1);
    return c;
  }

  std::vector<std::size_t> indices(Split which) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < size(); ++i) {
      if (split[i] == which) out.push_back(i);
    }
    return out;
  }

  void validate() const {
    const std::size_t n = labels.size();
    require(features.rows == n && sensitive.size() == n && split.size() == n, "invalid_dataset",
            "dataset columns have inconsistent lengths");
    require(features.values.size() == features.rows * features.cols, "invalid_dataset",
            "feature matrix storage does not match its shape");
  }

  bool operator==(const Dataset&) const = default;
};

struct SynthConfig {
  std::size_t n = 10000;
  std::size_t d = 10;
  double minority_fraction = 0.1;  // P(S = 1)
  double align = 0.95;             // P(spurious feature agrees with y | S = 0)
  double signal_snr = 1.2816;      // core mean shift; Phi(1.2816) ~= 0.90
  double spurious_snr = 3.0;       // spurious mean shift
  std::uint64_t seed = 0;
};

/// Binary task where feature 0 carries the label, feature 1 agrees with the
/// label with probability `align` for the majority and `1 - align` for the
/// minority, and the remaining features are noise. All samples are tagged
/// `train`; use stratified_split to assign splits.
inline Dataset generate_synthetic(const SynthConfig& cfg) {
  require(cfg.minority_fraction > 0.0 && cfg.minority_fraction < 1.0, "invalid_config",
          "minority_fraction must lie in (0, 1)");
  require(cfg.align >= 0.5 && cfg.align <= 1.0, "invalid_config", "align must lie in [0.5, 1]");
  require(cfg.d >= 2, "invalid_config", "synthetic data needs at least 2 features");
  require(cfg.n >= 1, "invalid_config", "synthetic data needs at least 1 sample");

  Rng rng(cfg.seed);
  Dataset ds;
  ds.features = Matrix(cfg.n, cfg.d);
  ds.labels.resize(cfg.n);
  ds.sensitive.resize(cfg.n);
  ds.split.assign(cfg.n, Split::train);
  for (std::size_t i = 0; i < cfg.n; ++i) {
    const std::size_t y = rng.bernoulli(0.5) ? 1 : 0;
    const bool minority = rng.bernoulli(cfg.minority_fraction);
    const double agree_prob = minority ? 1.0 - cfg.align : cfg.align;
    const bool agrees = rng.bernoulli(agree_prob);
    const double core_sign = y == 1 ? 1.0 : -1.0;
    const double spurious_sign = agrees ? core_sign : -core_sign;
    auto row = ds.features.row(i);
    row[0] = cfg.signal_snr * core_sign + rng.normal();
    row[1] = cfg.spurious_snr * spurious_sign + rng.normal();
    for (std::size_t j = 2; j < cfg.d; ++j) row[j] = rng.normal();
    ds.labels[i] = y;
    ds.sensitive[i] = minority ? Sensitive::minority : Sensitive::majority;
  }
  return ds;
}

// ---------------------------------------------------------------------------
// CSV: header f0,...,f{d-1},label,sensitive,split

namespace detail {

inline std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

inline std::string csv_error(std::size_t line_no, const std::string& what) {
  return "line " + std::to_string(line_no) + ": " + what;
}

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

inline Dataset parse_csv(std::istream& in) {
  using detail::csv_error;
  std::string line;
  std::size_t line_no = 1;
  require(static_cast<bool>(std::getline(in, line)), "malformed_csv", csv_error(1, "missing header"));
  const auto header = detail::split_commas(line);
  require(header.size() >= 4, "malformed_csv", csv_error(1, "header needs at least one feature column"));
  const std::size_t d = header.size() - 3;
  for (std::size_t j = 0; j < d; ++j) {
    require(header[j] == "f" + std::to_string(j), "malformed_csv",
            csv_error(1, "expected column f" + std::to_string(j)));
  }
  require(header[d] == "label" && header[d + 1] == "sensitive" && header[d + 2] == "split",
          "malformed_csv", csv_error(1, "trailing columns must be label,sensitive,split"));

  Dataset ds;
  ds.features.cols = d;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) {
      // Only a trailing blank line is tolerated.
      require(in.peek() == std::char_traits<char>::eof(), "malformed_csv",
              csv_error(line_no, "empty row"));
      break;
    }
    const auto cells = detail::split_commas(line);
    require(cells.size() == d + 3, "malformed_csv",
            csv_error(line_no, "expected " + std::to_string(d + 3) + " fields, got " +
                                   std::to_string(cells.size())));
    for (std::size_t j = 0; j < d; ++j) {
      double v = 0.0;
      const auto cell = cells[j];
      const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      require(!cell.empty() && ec == std::errc() && ptr == cell.data() + cell.size() && std::isfinite(v),
              "malformed_csv", csv_error(line_no, "non-numeric feature f" + std::to_string(j)));
      ds.features.values.push_back(v);
    }
    std::size_t label = 0;
    const auto lcell = cells[d];
    const auto [lptr, lec] = std::from_chars(lcell.data(), lcell.data() + lcell.size(), label);
    require(!lcell.empty() && lec == std::errc() && lptr == lcell.data() + lcell.size(), "malformed_csv",
            csv_error(line_no, "label must be a non-negative integer"));
    ds.labels.push_back(label);

    const auto scell = cells[d + 1];
    if (scell.empty()) {
      ds.sensitive.push_back(Sensitive::unlabeled);
    } else if (scell == "0") {
      ds.sensitive.push_back(Sensitive::majority);
    } else if (scell == "1") {
      ds.sensitive.push_back(Sensitive::minority);
    } else {
      throw Error("malformed_csv", csv_error(line_no, "sensitive must be 0, 1 or empty"));
    }

    const auto tag = cells[d + 2];
    if (tag == "train") {
      ds.split.push_back(Split::train);
    } else if (tag == "val") {
      ds.split.push_back(Split::val);
    } else if (tag == "test") {
      ds.split.push_back(Split::test);
    } else {
      throw Error("malformed_csv", csv_error(line_no, "unknown split tag '" + std::string(tag) + "'"));
    }
  }
  ds.features.rows = ds.labels.size();
  ds.validate();
  return ds;
}

inline Dataset load_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "io_error", "cannot open " + path);
  return parse_csv(in);
}

inline void write_csv(std::ostream& out, const Dataset& ds) {
  ds.validate();
  for (std::size_t j = 0; j < ds.dim(); ++j) out << 'f' << j << ',';
  out << "label,sensitive,split\n";
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (double v : ds.row(i)) out << detail::format_double(v) << ',';
    out << ds.labels[i] << ',';
    if (is_labeled(ds.sensitive[i])) out << group_index(ds.sensitive[i]);
    out << ',' << to_string(ds.split[i]) << '\n';
  }
}

inline void save_csv(const Dataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), "io_error", "cannot write " + path);
  write_csv(out, ds);
}

// ---------------------------------------------------------------------------
// Label availability

/// Keeps sensitive labels on exactly round(k * n_train) training samples
/// chosen uniformly without replacement. With `mask_validation` the
/// validation split is fully unlabeled; test labels are never touched.
inline Dataset mask_sensitive(const Dataset& ds, double keep_fraction, std::uint64_t seed,
                              bool mask_validation = true) {
  require(keep_fraction >= 0.0 && keep_fraction <= 1.0, "invalid_argument",
          "keep fraction must lie in [0, 1]");
  Dataset out = ds;
  auto train = ds.indices(Split::train);
  const auto keep = static_cast<std::size_t>(std::llround(keep_fraction * static_cast<double>(train.size())));
  Rng rng(seed);
  rng.shuffle(train);
  for (std::size_t r = keep; r < train.size(); ++r) out.sensitive[train[r]] = Sensitive::unlabeled;
  if (mask_validation && keep_fraction < 1.0) {
    for (std::size_t i : ds.indices(Split::val)) out.sensitive[i] = Sensitive::unlabeled;
  }
  return out;
}

/// Flips each labeled sensitive value independently with probability `rate`.
/// Only samples in `which` are touched.
inline Dataset inject_label_noise(const Dataset& ds, double rate, std::uint64_t seed,
                                  Split which = Split::train) {
  require(rate >= 0.0 && rate <= 1.0, "invalid_argument", "noise rate must lie in [0, 1]");
  Dataset out = ds;
  Rng rng(seed);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (ds.split[i] != which || !is_labeled(ds.sensitive[i])) continue;
    if (rng.bernoulli(rate)) {
      out.sensitive[i] = ds.sensitive[i] == Sensitive::minority ? Sensitive::majority : Sensitive::minority;
    }
  }
  return out;
}

/// Largest-remainder allocation: every count is floor or ceil of ratio * n.
inline std::array<std::size_t, 3> allocate_counts(std::size_t n, const std::array<double, 3>& ratios) {
  std::array<std::size_t, 3> counts{};
  std::array<double, 3> remainders{};
  std::size_t assigned = 0;
  for (std::size_t k = 0; k < 3; ++k) {
    const double exact = ratios[k] * static_cast<double>(n);
    counts[k] = static_cast<std::size_t>(std::floor(exact));
    remainders[k] = exact - static_cast<double>(counts[k]);
    assigned += counts[k];
  }
  while (assigned < n) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < 3; ++k) {
      if (remainders[k] > remainders[best]) best = k;
    }
    ++counts[best];
    remainders[best] = -1.0;
    ++assigned;
  }
  return counts;
}

/// Splits every (label, sensitive) cell proportionally to `ratios`
/// (train, val, test).
inline Dataset stratified_split(const Dataset& ds, const std::array<double, 3>& ratios, std::uint64_t seed) {
  double total = 0.0;
  std::size_t active = 0;
  for (double r : ratios) {
    require(r >= 0.0, "invalid_argument", "split ratios must be non-negative");
    total += r;
    if (r > 0.0) ++active;
  }
  require(std::abs(total - 1.0) < 1e-9, "invalid_argument", "split ratios must sum to 1");

  std::map<std::pair<std::size_t, int>, std::vector<std::size_t>> cells;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    cells[{ds.labels[i], static_cast<int>(ds.sensitive[i])}].push_back(i);
  }
  Dataset out = ds;
  Rng rng(seed);
  for (auto& [key, members] : cells) {
    require(members.size() >= active, "invalid_argument",
            "cell (label " + std::to_string(key.first) + ", sensitive " + std::to_string(key.second) +
                ") has " + std::to_string(members.size()) + " samples, fewer than the " +
                std::to_string(active) + " splits");
    rng.shuffle(members);
    const auto counts = allocate_counts(members.size(), ratios);
    std::size_t pos = 0;
    for (std::size_t k = 0; k < 3; ++k) {
      for (std::size_t c = 0; c < counts[k]; ++c) out.split[members[pos++]] = static_cast<Split>(k);
    }
  }
  return out;
}

}  // namespace fairgate
