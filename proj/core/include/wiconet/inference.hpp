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
#include <functional>
#include <optional>
#include <vector>

#include <torch/torch.h>

#include "wiconet/model.hpp"
#include "wiconet/windowing.hpp"

namespace wiconet {

/// Maps a batch of (local [B,c,h_l,w_l], context [B,c,h_c/s,w_c/s]) inputs to
/// local-branch logits [B,u,h_l,w_l].
using WindowPredictor =
    std::function<torch::Tensor(const torch::Tensor& local, const torch::Tensor& context)>;

/// Eval-mode predictor over a model; images are normalised with `stats`.
WindowPredictor make_predictor(SegmentationModel model, const BandStats& stats);

struct SlidingOptions {
  int64_t stride = 0;  // 0 = local window size (no overlap)
  int64_t batch_size = 8;
  bool keep_logits = false;
};

struct PredictionMap {
  torch::Tensor classes;               // int64 [H, W]
  std::optional<torch::Tensor> logits; // float [u, H, W], averaged
};

// Window start positions along one axis: 0, stride, 2*stride, ... plus a final
// window flush with the far edge when the grid does not land on it.
std::vector<int64_t> window_starts(int64_t extent, int64_t window, int64_t stride);

// Argmax over dim 0 of [u, H, W]; ties go to the lowest class index.
torch::Tensor argmax_lowest(const torch::Tensor& logits);

/// Covers the tile with local windows, extracts each window's context with
/// reflection at the borders, and averages overlapping local logits before
/// the argmax.
PredictionMap sliding_predict(const WindowPredictor& predictor, const RasterTile& tile,
                              const WindowGeometry& geometry, const SlidingOptions& options = {});

}  // namespace wiconet
