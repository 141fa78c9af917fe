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

#include "wiconet/synth.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include <ATen/CPUGeneratorImpl.h>
#include <fmt/format.h>

#include "wiconet/errors.hpp"

namespace wiconet {

int64_t SynthOptions::resolved_marker_size() const {
  if (marker_size > 0) return marker_size;
  const int64_t ring = std::min(geometry.margin_rows(), geometry.margin_cols());
  return std::max<int64_t>(1, ring / 2);
}

void SynthOptions::validate() const {
  geometry.validate();
  if (num_classes < 2) throw ConfigError("synthetic task needs at least two classes");
  if (samples < 0) throw ConfigError("negative sample count");
  if (bands < 1) throw ConfigError("synthetic task needs at least one band");
  if (geometry.ratio == 1) {
    throw ConfigError("context window equals the local window; the synthetic label would be "
                      "unobservable");
  }
  const int64_t ring = std::min(geometry.margin_rows(), geometry.margin_cols());
  if (resolved_marker_size() > ring) {
    throw ConfigError(fmt::format("marker of {}px does not fit in a {}px context ring",
                                  resolved_marker_size(), ring));
  }
}

std::vector<float> marker_color(int64_t label, int64_t num_classes, int64_t bands,
                                double amplitude) {
  const double theta = 2.0 * std::numbers::pi * static_cast<double>(label) /
                       static_cast<double>(num_classes);
  const double spread = 2.0 * std::numbers::pi / static_cast<double>(std::max<int64_t>(bands, 3));
  std::vector<float> c;
  for (int64_t b = 0; b < bands; ++b) {
    c.push_back(static_cast<float>(amplitude * std::cos(theta - spread * static_cast<double>(b))));
  }
  return c;
}

namespace {

uint64_t mix(uint64_t seed, uint64_t stream, uint64_t index) {
  // splitmix64 over the combined key
  uint64_t z = seed * 0x9E3779B97F4A7C15ULL ^ (stream << 56) ^ index;
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

torch::Tensor gaussian(at::IntArrayRef shape, uint64_t seed, double stddev) {
  auto gen = at::make_generator<at::CPUGeneratorImpl>(seed);
  return torch::randn(shape, gen, torch::kFloat) * stddev;
}

}  // namespace

SynthSample synth_sample(const SynthOptions& o, int64_t index) {
  o.validate();
  const auto& g = o.geometry;
  const int64_t h = g.context_height();
  const int64_t w = g.context_width();
  const int64_t group = index / o.num_classes;
  const int64_t label = index % o.num_classes;

  SynthSample s;
  s.label = label;
  s.tile.id = fmt::format("synth_{:06d}", index);
  s.tile.pixels = gaussian({o.bands, h, w}, mix(o.seed, 1, static_cast<uint64_t>(index)),
                           o.noise_std);
  const int64_t top = g.margin_rows();
  const int64_t left = g.margin_cols();
  using torch::indexing::Slice;
  s.tile.pixels.index_put_(
      {Slice(), Slice(top, top + g.local_height), Slice(left, left + g.local_width)},
      gaussian({o.bands, g.local_height, g.local_width},
               mix(o.seed, 2, static_cast<uint64_t>(group)), o.noise_std));

  // Marker anywhere in the ring, never touching the local window.
  const int64_t m = o.resolved_marker_size();
  std::mt19937_64 rng(mix(o.seed, 3, static_cast<uint64_t>(index)));
  std::uniform_int_distribution<int64_t> row_d(0, h - m);
  std::uniform_int_distribution<int64_t> col_d(0, w - m);
  PixelOrigin at;
  for (;;) {
    at = {row_d(rng), col_d(rng)};
    const bool clear_rows = at.row + m <= top || at.row >= top + g.local_height;
    const bool clear_cols = at.col + m <= left || at.col >= left + g.local_width;
    if (clear_rows || clear_cols) break;
  }
  s.marker = at;
  const auto color = marker_color(label, o.num_classes, o.bands, o.marker_amplitude);
  auto patch = torch::tensor(color, torch::kFloat).view({o.bands, 1, 1}).expand({o.bands, m, m});
  auto jitter = gaussian({o.bands, m, m}, mix(o.seed, 4, static_cast<uint64_t>(index)),
                         0.1 * o.noise_std);
  s.tile.pixels.index_put_({Slice(), Slice(at.row, at.row + m), Slice(at.col, at.col + m)},
                           patch + jitter);
  s.tile.labels = torch::full({h, w}, label, torch::kLong);
  return s;
}

std::vector<WindowPair> synth_dataset(const SynthOptions& o) {
  o.validate();
  std::vector<WindowPair> out;
  out.reserve(static_cast<size_t>(o.samples));
  for (int64_t i = 0; i < o.samples; ++i) {
    const auto s = synth_sample(o, i);
    out.push_back(extract_window_pair(s.tile, centered_origin(s.tile, o.geometry), o.geometry));
  }
  return out;
}

}  // namespace wiconet
