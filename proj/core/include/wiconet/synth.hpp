// Copyright 2026 The wiconet Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <vector>

#include "wiconet/windowing.hpp"

namespace wiconet {

/// Synthetic context-dependency task.
///
/// Each sample is a context-window-sized tile whose local window (at the
/// centre) is pure Gaussian texture. A square marker of class colour k sits in
/// the ring between the local and context windows; the whole label map is k.
/// Samples come in groups of `num_classes` twins that share the same local
/// texture and differ only in the ring, so nothing inside the local window
/// predicts the label. A model that cannot see the ring scores exactly
/// 1/num_classes on complete groups.
struct SynthOptions {
  int64_t samples = 0;
  int64_t num_classes = 4;
  WindowGeometry geometry{64, 64, 3, 4};
  uint64_t seed = 0;
  int64_t bands = 3;
  int64_t marker_size = 0;  // 0 picks half the ring width
  double noise_std = 1.0;
  double marker_amplitude = 3.0;

  int64_t resolved_marker_size() const;
  // Throws ConfigError when the task is unlearnable or the marker cannot fit.
  void validate() const;
};

struct SynthSample {
  RasterTile tile;
  int64_t label = 0;
  PixelOrigin marker;  // top-left of the marker square
};

// Class colour, one value per band.
std::vector<float> marker_color(int64_t label, int64_t num_classes, int64_t bands,
                                double amplitude);

SynthSample synth_sample(const SynthOptions& options, int64_t index);

/// All samples as centred window pairs. Deterministic in `options.seed`.
std::vector<WindowPair> synth_dataset(const SynthOptions& options);

}  // namespace wiconet
