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

// Parameter and FLOP accounting for a base model plus gated adapters and
// detectors. A multiply-add counts as 2 FLOPs.

#include <cstddef>
#include <span>

#include "fairgate/detector.hpp"
#include "fairgate/fairlora.hpp"
#include "fairgate/model.hpp"

namespace fairgate {

struct Overhead {
  std::size_t params_base = 0;
  std::size_t params_added = 0;
  std::size_t flops_per_sample_base = 0;         // base model alone
  std::size_t flops_per_sample_untriggered = 0;  // base + detectors
  std::size_t flops_per_sample_triggered = 0;    // base + detectors + every adapter
};

/// params_added = sum over adapters of r (d + k) plus all detector parameters.
inline Overhead count_overhead(const BaseModel& model, std::span<const AdapterUnit> units,
                               std::span<const BiasDetector> detectors) {
  Overhead o;
  o.params_base = count_params(model);
  o.flops_per_sample_base = count_flops(model);
  std::size_t detector_flops = 0;
  for (const auto& d : detectors) {
    o.params_added += d.param_count();
    detector_flops += d.flops_per_vector();
  }
  std::size_t adapter_flops = 0;
  for (const auto& u : units) {
    const auto& a = u.adapter;
    o.params_added += a.rank() * (a.up.rows + a.down.cols);
    adapter_flops += 2 * a.rank() * a.down.cols + 2 * a.up.rows * a.rank();
  }
  o.flops_per_sample_untriggered = o.flops_per_sample_base + detector_flops;
  o.flops_per_sample_triggered = o.flops_per_sample_untriggered + adapter_flops;
  return o;
}

}  // namespace fairgate
