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
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <torch/torch.h>

namespace wiconet {

/// A large multi-band raster with an aligned label map.
///
/// `pixels` is float32 [bands, H, W]; `labels` is int64 [H, W].
struct RasterTile {
  torch::Tensor pixels;
  torch::Tensor labels;
  std::string id;

  int64_t bands() const { return pixels.size(0); }
  int64_t height() const { return pixels.size(1); }
  int64_t width() const { return pixels.size(2); }

  // Throws DataError when shapes disagree or a non-ignore label is >= num_classes.
  void validate(int64_t num_classes, std::optional<int64_t> ignore_index = std::nullopt) const;
};

struct PixelOrigin {
  int64_t row = 0;
  int64_t col = 0;
  bool operator==(const PixelOrigin&) const = default;
};

/// Local/context window sizes. The context window is `ratio` times the local
/// window per side, centred on it, and enters the context branch after a
/// `context_downsample` reduction.
struct WindowGeometry {
  int64_t local_height = 256;
  int64_t local_width = 256;
  int64_t ratio = 3;
  int64_t context_downsample = 4;

  int64_t context_height() const { return local_height * ratio; }
  int64_t context_width() const { return local_width * ratio; }
  int64_t context_input_height() const { return context_height() / context_downsample; }
  int64_t context_input_width() const { return context_width() / context_downsample; }
  // Rows/cols the context window extends beyond the local window on each side.
  int64_t margin_rows() const { return (ratio - 1) / 2 * local_height; }
  int64_t margin_cols() const { return (ratio - 1) / 2 * local_width; }

  // Throws GeometryError for even ratios or sizes not divisible by the downsample.
  void validate() const;
};

/// One training sample.
struct WindowPair {
  torch::Tensor local_image;    // float32 [c, h_l, w_l]
  torch::Tensor context_image;  // float32 [c, h_c/s, w_c/s]
  torch::Tensor local_label;    // int64 [h_l, w_l]
  torch::Tensor context_label;  // int64 [h_c/s, w_c/s]
  PixelOrigin origin;
};

struct PadMargins {
  int64_t top = 0;
  int64_t bottom = 0;
  int64_t left = 0;
  int64_t right = 0;
};

// Mirror index for a reflection that excludes the border sample itself
// (period 2(n-1)). Valid for -(n-1) <= index <= 2(n-1).
int64_t reflect_index(int64_t index, int64_t n);

/// Pads the trailing two dims of `image` ([..., H, W]) by reflection.
/// Each margin must be smaller than the corresponding dimension.
torch::Tensor reflect_pad(const torch::Tensor& image, const PadMargins& margins);

/// Area (mean) pooling by an integer factor over the trailing two dims.
torch::Tensor downsample_mean(const torch::Tensor& image, int64_t factor);

/// Nearest-neighbour label reduction: output (i, j) samples input
/// (i*factor + factor/2, j*factor + factor/2).
torch::Tensor downsample_nearest(const torch::Tensor& labels, int64_t factor);

/// Crops the local window at `origin` and the reflect-padded context window
/// centred on it, then reduces the context crop by `context_downsample`.
WindowPair extract_window_pair(const RasterTile& tile, PixelOrigin origin,
                               const WindowGeometry& geometry);

// Origin that centres the local window inside a tile.
PixelOrigin centered_origin(const RasterTile& tile, const WindowGeometry& geometry);

// ----------------------------------------------------------------------------
// Dataset splits

struct SplitSpec {
  int64_t crop_size = 2048;
  int64_t train = 49;
  int64_t val = 7;
  int64_t test = 8;
};

enum class SplitRole { kTrain, kVal, kTest };
std::string role_name(SplitRole role);
SplitRole parse_role(const std::string& name);

struct CropPlacement {
  PixelOrigin origin;
  SplitRole role = SplitRole::kTrain;
  int64_t grid_row = 0;
  int64_t grid_col = 0;
};

struct SplitResult {
  std::vector<RasterTile> train;
  std::vector<RasterTile> val;
  std::vector<RasterTile> test;
  std::vector<CropPlacement> placements;
  // Largest overlap (pixels) between two same-role neighbours.
  int64_t max_overlap = 0;
};

/// Plans square crops so that crops of different roles never share a pixel.
/// Roles are assigned row-major over a grid; neighbouring crops of the same
/// role may overlap to fit the tile evenly.
std::vector<CropPlacement> plan_split(int64_t height, int64_t width, const SplitSpec& spec);

SplitResult split_tile(const RasterTile& tile, const SplitSpec& spec);

// ----------------------------------------------------------------------------
// Augmentation

struct AugmentOptions {
  double flip_probability = 0.5;
  bool random_crop = true;
  double min_crop_scale = 0.75;
};

// One random draw. Offsets are in units of the local window half-extent.
struct AugmentDraw {
  bool horizontal_flip = false;
  bool vertical_flip = false;
  double crop_scale = 1.0;
  double offset_x = 0.0;
  double offset_y = 0.0;

  bool is_identity() const {
    return !horizontal_flip && !vertical_flip && crop_scale == 1.0 && offset_x == 0.0 &&
           offset_y == 0.0;
  }
};

AugmentDraw draw_augment(std::mt19937_64& rng, const AugmentOptions& options);

/// Applies one geometric transform jointly to all four arrays. The random
/// crop is a zoom about a point inside the local window; the context arrays
/// receive the same zoom about the same physical point, so the local window
/// stays centred in the context window.
WindowPair apply_augment(const WindowPair& pair, const AugmentDraw& draw, int64_t ratio);

WindowPair augment(const WindowPair& pair, std::mt19937_64& rng, const AugmentOptions& options,
                   int64_t ratio);

// ----------------------------------------------------------------------------
// Normalisation

/// Per-band z-score statistics.
struct BandStats {
  std::vector<double> mean;
  std::vector<double> stddev;

  static BandStats identity(int64_t bands);
  static BandStats compute(const std::vector<RasterTile>& tiles);
  static BandStats compute(const std::vector<WindowPair>& pairs);

  // Normalises [c, H, W] or [B, c, H, W].
  torch::Tensor apply(const torch::Tensor& image) const;
};

}  // namespace wiconet
