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

#include "wiconet/windowing.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <fmt/format.h>

#include "wiconet/errors.hpp"

namespace wiconet {

namespace F = torch::nn::functional;

void RasterTile::validate(int64_t num_classes, std::optional<int64_t> ignore_index) const {
  if (pixels.dim() != 3) {
    throw DataError(fmt::format("tile '{}': pixels must be [bands, H, W], got {} dims", id,
                                pixels.dim()));
  }
  if (labels.dim() != 2 || labels.size(0) != height() || labels.size(1) != width()) {
    throw DataError(fmt::format("tile '{}': label map does not match pixel extent {}x{}", id,
                                height(), width()));
  }
  auto valid = labels.ge(0).logical_and(labels.lt(num_classes));
  if (ignore_index) valid = valid.logical_or(labels.eq(*ignore_index));
  if (!valid.all().item<bool>()) {
    throw DataError(fmt::format("tile '{}': label outside [0, {})", id, num_classes));
  }
}

void WindowGeometry::validate() const {
  if (local_height <= 0 || local_width <= 0 || ratio <= 0 || context_downsample <= 0) {
    throw GeometryError("window sizes, ratio and downsample must be positive");
  }
  if (ratio % 2 == 0) {
    throw GeometryError(fmt::format("ratio {} cannot centre the local window", ratio));
  }
  if (context_height() % context_downsample != 0 || context_width() % context_downsample != 0) {
    throw GeometryError(fmt::format("context window {}x{} not divisible by downsample {}",
                                    context_height(), context_width(), context_downsample));
  }
}

int64_t reflect_index(int64_t index, int64_t n) {
  if (n == 1) return 0;
  const int64_t period = 2 * (n - 1);
  int64_t i = index % period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

namespace {

torch::Tensor reflected_range(int64_t begin, int64_t end, int64_t n) {
  std::vector<int64_t> idx;
  idx.reserve(static_cast<size_t>(end - begin));
  for (int64_t i = begin; i < end; ++i) idx.push_back(reflect_index(i, n));
  return torch::tensor(idx, torch::kLong);
}

}  // namespace

torch::Tensor reflect_pad(const torch::Tensor& image, const PadMargins& m) {
  if (image.dim() < 2) throw GeometryError("reflect_pad needs at least two dims");
  const int64_t h = image.size(-2);
  const int64_t w = image.size(-1);
  if (m.top < 0 || m.bottom < 0 || m.left < 0 || m.right < 0) {
    throw GeometryError("negative pad margin");
  }
  if (m.top >= h || m.bottom >= h || m.left >= w || m.right >= w) {
    throw GeometryError(fmt::format("pad ({},{},{},{}) too large for {}x{} image", m.top,
                                    m.bottom, m.left, m.right, h, w));
  }
  if (m.top == 0 && m.bottom == 0 && m.left == 0 && m.right == 0) return image.clone();
  auto rows = reflected_range(-m.top, h + m.bottom, h).to(image.device());
  auto cols = reflected_range(-m.left, w + m.right, w).to(image.device());
  return image.index_select(-2, rows).index_select(-1, cols);
}

torch::Tensor downsample_mean(const torch::Tensor& image, int64_t factor) {
  if (factor == 1) return image.clone();
  if (image.size(-2) % factor != 0 || image.size(-1) % factor != 0) {
    throw GeometryError(fmt::format("{}x{} not divisible by {}", image.size(-2), image.size(-1),
                                    factor));
  }
  return F::avg_pool2d(image, F::AvgPool2dFuncOptions(factor).stride(factor));
}

torch::Tensor downsample_nearest(const torch::Tensor& labels, int64_t factor) {
  if (factor == 1) return labels.clone();
  if (labels.size(-2) % factor != 0 || labels.size(-1) % factor != 0) {
    throw GeometryError(fmt::format("{}x{} not divisible by {}", labels.size(-2),
                                    labels.size(-1), factor));
  }
  auto rows = torch::arange(factor / 2, labels.size(-2), factor, torch::kLong);
  auto cols = torch::arange(factor / 2, labels.size(-1), factor, torch::kLong);
  return labels.index_select(-2, rows).index_select(-1, cols);
}

WindowPair extract_window_pair(const RasterTile& tile, PixelOrigin origin,
                               const WindowGeometry& g) {
  g.validate();
  const int64_t h = tile.height();
  const int64_t w = tile.width();
  if (origin.row < 0 || origin.col < 0 || origin.row + g.local_height > h ||
      origin.col + g.local_width > w) {
    throw GeometryError(fmt::format("local window {}x{} at ({},{}) leaves {}x{} tile",
                                    g.local_height, g.local_width, origin.row, origin.col, h, w));
  }
  const int64_t r0 = origin.row - g.margin_rows();
  const int64_t r1 = origin.row + g.local_height + g.margin_rows();
  const int64_t c0 = origin.col - g.margin_cols();
  const int64_t c1 = origin.col + g.local_width + g.margin_cols();
  // Same validity rule as reflect_pad: padding must stay below the tile extent.
  if (-r0 >= h || r1 - h >= h || -c0 >= w || c1 - w >= w) {
    throw GeometryError(fmt::format("context window {}x{} needs more reflection than a {}x{} tile "
                                    "provides",
                                    g.context_height(), g.context_width(), h, w));
  }

  WindowPair pair;
  pair.origin = origin;
  using torch::indexing::Slice;
  pair.local_image = tile.pixels
                         .index({Slice(), Slice(origin.row, origin.row + g.local_height),
                                 Slice(origin.col, origin.col + g.local_width)})
                         .clone();
  pair.local_label = tile.labels
                         .index({Slice(origin.row, origin.row + g.local_height),
                                 Slice(origin.col, origin.col + g.local_width)})
                         .clone();

  torch::Tensor ctx_pixels;
  torch::Tensor ctx_labels;
  if (r0 >= 0 && c0 >= 0 && r1 <= h && c1 <= w) {
    ctx_pixels = tile.pixels.index({Slice(), Slice(r0, r1), Slice(c0, c1)});
    ctx_labels = tile.labels.index({Slice(r0, r1), Slice(c0, c1)});
  } else {
    auto rows = reflected_range(r0, r1, h);
    auto cols = reflected_range(c0, c1, w);
    ctx_pixels = tile.pixels.index_select(1, rows).index_select(2, cols);
    ctx_labels = tile.labels.index_select(0, rows).index_select(1, cols);
  }
  pair.context_image = downsample_mean(ctx_pixels, g.context_downsample).contiguous();
  pair.context_label = downsample_nearest(ctx_labels, g.context_downsample).contiguous();
  return pair;
}

PixelOrigin centered_origin(const RasterTile& tile, const WindowGeometry& g) {
  return {(tile.height() - g.local_height) / 2, (tile.width() - g.local_width) / 2};
}

// ----------------------------------------------------------------------------

std::string role_name(SplitRole role) {
  switch (role) {
    case SplitRole::kTrain: return "train";
    case SplitRole::kVal: return "val";
    case SplitRole::kTest: return "test";
  }
  return "train";
}

SplitRole parse_role(const std::string& name) {
  if (name == "train") return SplitRole::kTrain;
  if (name == "val") return SplitRole::kVal;
  if (name == "test") return SplitRole::kTest;
  throw ConfigError(fmt::format("unknown split '{}' (expected train, val or test)", name));
}

namespace {

// Positions for `n` crops along a line of `length`. Hard gaps must not overlap;
// soft gaps share whatever spacing remains.
std::vector<int64_t> place_line(int64_t n, int64_t length, int64_t crop,
                                const std::vector<bool>& hard) {
  std::vector<int64_t> pos(static_cast<size_t>(n), 0);
  if (n <= 1) return pos;
  if (n * crop <= length) {
    const double step = static_cast<double>(length - crop) / static_cast<double>(n - 1);
    for (int64_t i = 0; i < n; ++i) pos[i] = std::llround(step * static_cast<double>(i));
    return pos;
  }
  const auto n_hard = static_cast<int64_t>(std::count(hard.begin(), hard.end(), true));
  const int64_t n_soft = n - 1 - n_hard;
  const int64_t free = length - crop - n_hard * crop;
  if (n_soft == 0 || free < 0) {
    throw GeometryError(fmt::format("cannot fit {} disjoint {}px crops in {}px", n, crop, length));
  }
  const double soft_step = static_cast<double>(free) / static_cast<double>(n_soft);
  if (soft_step < static_cast<double>(crop) / 2.0) {
    throw GeometryError(fmt::format("{} crops of {}px overlap by more than half in {}px", n, crop,
                                    length));
  }
  double x = 0.0;
  for (int64_t i = 1; i < n; ++i) {
    x += hard[i - 1] ? static_cast<double>(crop) : soft_step;
    pos[i] = std::llround(x);
  }
  pos.back() = length - crop;
  return pos;
}

}  // namespace

std::vector<CropPlacement> plan_split(int64_t height, int64_t width, const SplitSpec& spec) {
  if (spec.crop_size <= 0 || spec.train < 0 || spec.val < 0 || spec.test < 0) {
    throw ConfigError("split crop size must be positive and counts non-negative");
  }
  if (height < spec.crop_size || width < spec.crop_size) {
    throw GeometryError(fmt::format("{}x{} tile smaller than crop {}", height, width,
                                    spec.crop_size));
  }
  const int64_t total = spec.train + spec.val + spec.test;
  if (total == 0) return {};

  std::vector<SplitRole> roles;
  roles.insert(roles.end(), spec.train, SplitRole::kTrain);
  roles.insert(roles.end(), spec.val, SplitRole::kVal);
  roles.insert(roles.end(), spec.test, SplitRole::kTest);

  const int64_t cols = std::min(total, (width + spec.crop_size - 1) / spec.crop_size);
  const int64_t rows = (total + cols - 1) / cols;
  auto row_items = [&](int64_t r) {
    return std::pair{r * cols, std::min(total, (r + 1) * cols)};
  };

  std::vector<bool> hard_rows;
  for (int64_t r = 0; r + 1 < rows; ++r) {
    std::set<SplitRole> seen;
    for (int64_t r2 : {r, r + 1}) {
      auto [b, e] = row_items(r2);
      for (int64_t i = b; i < e; ++i) seen.insert(roles[i]);
    }
    hard_rows.push_back(seen.size() > 1);
  }
  const auto ys = place_line(rows, height, spec.crop_size, hard_rows);

  std::vector<CropPlacement> out;
  out.reserve(static_cast<size_t>(total));
  for (int64_t r = 0; r < rows; ++r) {
    auto [b, e] = row_items(r);
    std::vector<bool> hard_cols;
    for (int64_t i = b; i + 1 < e; ++i) hard_cols.push_back(roles[i] != roles[i + 1]);
    const auto xs = place_line(e - b, width, spec.crop_size, hard_cols);
    for (int64_t i = b; i < e; ++i) {
      out.push_back({{ys[r], xs[i - b]}, roles[i], r, i - b});
    }
  }
  return out;
}

SplitResult split_tile(const RasterTile& tile, const SplitSpec& spec) {
  SplitResult result;
  result.placements = plan_split(tile.height(), tile.width(), spec);
  using torch::indexing::Slice;
  const int64_t c = spec.crop_size;
  for (size_t i = 0; i < result.placements.size(); ++i) {
    const auto& p = result.placements[i];
    RasterTile sub;
    sub.id = fmt::format("{}_r{}c{}", tile.id, p.grid_row, p.grid_col);
    sub.pixels = tile.pixels
                     .index({Slice(), Slice(p.origin.row, p.origin.row + c),
                             Slice(p.origin.col, p.origin.col + c)})
                     .clone();
    sub.labels = tile.labels
                     .index({Slice(p.origin.row, p.origin.row + c),
                             Slice(p.origin.col, p.origin.col + c)})
                     .clone();
    switch (p.role) {
      case SplitRole::kTrain: result.train.push_back(std::move(sub)); break;
      case SplitRole::kVal: result.val.push_back(std::move(sub)); break;
      case SplitRole::kTest: result.test.push_back(std::move(sub)); break;
    }
    for (size_t j = 0; j < i; ++j) {
      const auto& q = result.placements[j];
      if (q.role != p.role) continue;
      const int64_t dy = c - std::abs(p.origin.row - q.origin.row);
      const int64_t dx = c - std::abs(p.origin.col - q.origin.col);
      if (dy > 0 && dx > 0) result.max_overlap = std::max(result.max_overlap, std::min(dy, dx));
    }
  }
  return result;
}

// ----------------------------------------------------------------------------

AugmentDraw draw_augment(std::mt19937_64& rng, const AugmentOptions& options) {
  std::bernoulli_distribution flip(options.flip_probability);
  AugmentDraw d;
  d.horizontal_flip = flip(rng);
  d.vertical_flip = flip(rng);
  if (options.random_crop && options.min_crop_scale < 1.0) {
    std::uniform_real_distribution<double> scale(options.min_crop_scale, 1.0);
    d.crop_scale = scale(rng);
    const double slack = 1.0 - d.crop_scale;
    std::uniform_real_distribution<double> offset(-slack, slack);
    d.offset_x = offset(rng);
    d.offset_y = offset(rng);
  }
  return d;
}

namespace {

// Resamples [..., H, W] through the affine zoom x_in = s * x_out + t in
// normalised coordinates.
torch::Tensor zoom(const torch::Tensor& x, double scale, double tx, double ty, bool nearest) {
  const bool is_label = x.dim() == 2;
  auto input = is_label ? x.to(torch::kFloat).unsqueeze(0).unsqueeze(0) : x.unsqueeze(0);
  auto theta = torch::tensor({scale, 0.0, tx, 0.0, scale, ty}, input.options()).view({1, 2, 3});
  auto grid = F::affine_grid(theta, input.sizes(), /*align_corners=*/false);
  auto options = F::GridSampleFuncOptions().padding_mode(torch::kBorder).align_corners(false);
  if (nearest) {
    options.mode(torch::kNearest);
  } else {
    options.mode(torch::kBilinear);
  }
  auto out = F::grid_sample(input, grid, options);
  if (is_label) return out.squeeze(0).squeeze(0).round().to(torch::kLong);
  return out.squeeze(0);
}

}  // namespace

WindowPair apply_augment(const WindowPair& pair, const AugmentDraw& d, int64_t ratio) {
  WindowPair out = pair;
  if (d.is_identity()) return out;
  if (d.crop_scale != 1.0 || d.offset_x != 0.0 || d.offset_y != 0.0) {
    const double s = d.crop_scale;
    const double r = static_cast<double>(ratio);
    out.local_image = zoom(out.local_image, s, d.offset_x, d.offset_y, false);
    out.local_label = zoom(out.local_label, s, d.offset_x, d.offset_y, true);
    out.context_image = zoom(out.context_image, s, d.offset_x / r, d.offset_y / r, false);
    out.context_label = zoom(out.context_label, s, d.offset_x / r, d.offset_y / r, true);
  }
  auto flip_all = [&](int64_t image_dim, int64_t label_dim) {
    out.local_image = out.local_image.flip({image_dim});
    out.context_image = out.context_image.flip({image_dim});
    out.local_label = out.local_label.flip({label_dim});
    out.context_label = out.context_label.flip({label_dim});
  };
  if (d.horizontal_flip) flip_all(2, 1);
  if (d.vertical_flip) flip_all(1, 0);
  return out;
}

WindowPair augment(const WindowPair& pair, std::mt19937_64& rng, const AugmentOptions& options,
                   int64_t ratio) {
  return apply_augment(pair, draw_augment(rng, options), ratio);
}

// ----------------------------------------------------------------------------

BandStats BandStats::identity(int64_t bands) {
  return {std::vector<double>(static_cast<size_t>(bands), 0.0),
          std::vector<double>(static_cast<size_t>(bands), 1.0)};
}

namespace {

BandStats finish_stats(const torch::Tensor& sum, const torch::Tensor& sum_sq, double count) {
  BandStats s;
  const auto n = sum.size(0);
  for (int64_t b = 0; b < n; ++b) {
    const double mean = sum[b].item<double>() / count;
    const double var = std::max(0.0, sum_sq[b].item<double>() / count - mean * mean);
    s.mean.push_back(mean);
    s.stddev.push_back(var > 1e-24 ? std::sqrt(var) : 1.0);
  }
  return s;
}

}  // namespace

BandStats BandStats::compute(const std::vector<RasterTile>& tiles) {
  if (tiles.empty()) throw ContractViolation("band statistics need at least one tile");
  const auto bands = tiles.front().bands();
  auto sum = torch::zeros({bands}, torch::kDouble);
  auto sum_sq = torch::zeros({bands}, torch::kDouble);
  double count = 0.0;
  for (const auto& t : tiles) {
    auto p = t.pixels.to(torch::kDouble);
    sum += p.sum({1, 2});
    sum_sq += p.square().sum({1, 2});
    count += static_cast<double>(t.height() * t.width());
  }
  return finish_stats(sum, sum_sq, count);
}

BandStats BandStats::compute(const std::vector<WindowPair>& pairs) {
  if (pairs.empty()) throw ContractViolation("band statistics need at least one sample");
  const auto bands = pairs.front().local_image.size(0);
  auto sum = torch::zeros({bands}, torch::kDouble);
  auto sum_sq = torch::zeros({bands}, torch::kDouble);
  double count = 0.0;
  for (const auto& p : pairs) {
    auto x = p.local_image.to(torch::kDouble);
    sum += x.sum({1, 2});
    sum_sq += x.square().sum({1, 2});
    count += static_cast<double>(x.size(1) * x.size(2));
  }
  return finish_stats(sum, sum_sq, count);
}

torch::Tensor BandStats::apply(const torch::Tensor& image) const {
  const auto bands = static_cast<int64_t>(mean.size());
  const int64_t band_dim = image.dim() == 4 ? 1 : 0;
  if (image.size(band_dim) != bands) {
    throw DataError(fmt::format("normaliser has {} bands, image has {}", bands,
                                image.size(band_dim)));
  }
  std::vector<int64_t> shape(static_cast<size_t>(image.dim()), 1);
  shape[static_cast<size_t>(band_dim)] = bands;
  auto m = torch::tensor(mean, torch::kDouble).to(image.dtype()).view(shape);
  auto s = torch::tensor(stddev, torch::kDouble).to(image.dtype()).view(shape);
  return (image - m) / s;
}

}  // namespace wiconet
