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

#include "wiconet/inference.hpp"

#include <fmt/format.h>

#include "wiconet/errors.hpp"

namespace wiconet {

WindowPredictor make_predictor(SegmentationModel model, const BandStats& stats) {
  return [model, stats](const torch::Tensor& local, const torch::Tensor& context) mutable {
    torch::NoGradGuard no_grad;
    model->eval();
    auto l = stats.apply(local);
    std::optional<torch::Tensor> c;
    if (model->uses_context()) c = stats.apply(context);
    return model->forward(l, c).local;
  };
}

std::vector<int64_t> window_starts(int64_t extent, int64_t window, int64_t stride) {
  if (window > extent) {
    throw GeometryError(fmt::format("{}px window does not fit in {}px", window, extent));
  }
  if (stride <= 0) throw ConfigError("sliding stride must be positive");
  std::vector<int64_t> starts;
  for (int64_t s = 0; s + window <= extent; s += stride) starts.push_back(s);
  if (starts.back() + window < extent) starts.push_back(extent - window);
  return starts;
}

torch::Tensor argmax_lowest(const torch::Tensor& logits) {
  // Explicit scan keeps the tie rule independent of backend argmax details.
  auto best = logits[0].clone();
  auto index = torch::zeros(best.sizes(), torch::kLong);
  for (int64_t k = 1; k < logits.size(0); ++k) {
    auto better = logits[k].gt(best);
    best = torch::where(better, logits[k], best);
    index.masked_fill_(better, k);
  }
  return index;
}

PredictionMap sliding_predict(const WindowPredictor& predictor, const RasterTile& tile,
                              const WindowGeometry& g, const SlidingOptions& options) {
  g.validate();
  const int64_t stride = options.stride > 0 ? options.stride : g.local_height;
  const auto rows = window_starts(tile.height(), g.local_height, stride);
  const auto cols = window_starts(tile.width(), g.local_width, options.stride > 0
                                                                   ? options.stride
                                                                   : g.local_width);
  std::vector<PixelOrigin> origins;
  for (auto r : rows) {
    for (auto c : cols) origins.push_back({r, c});
  }

  torch::Tensor sum;
  auto hits = torch::zeros({tile.height(), tile.width()}, torch::kFloat);
  using torch::indexing::Slice;
  const auto batch = std::max<int64_t>(1, options.batch_size);
  for (size_t start = 0; start < origins.size(); start += static_cast<size_t>(batch)) {
    const size_t end = std::min(origins.size(), start + static_cast<size_t>(batch));
    std::vector<torch::Tensor> locals;
    std::vector<torch::Tensor> contexts;
    for (size_t i = start; i < end; ++i) {
      auto pair = extract_window_pair(tile, origins[i], g);
      locals.push_back(pair.local_image);
      contexts.push_back(pair.context_image);
    }
    auto logits = predictor(torch::stack(locals), torch::stack(contexts)).to(torch::kFloat);
    if (!sum.defined()) {
      sum = torch::zeros({logits.size(1), tile.height(), tile.width()}, torch::kFloat);
    }
    for (size_t i = start; i < end; ++i) {
      const auto& o = origins[i];
      auto rs = Slice(o.row, o.row + g.local_height);
      auto cs = Slice(o.col, o.col + g.local_width);
      sum.index({Slice(), rs, cs}) += logits[static_cast<int64_t>(i - start)];
      hits.index({rs, cs}) += 1.0f;
    }
  }
  auto mean = sum / hits.unsqueeze(0);
  PredictionMap out;
  out.classes = argmax_lowest(mean);
  if (options.keep_logits) out.logits = mean;
  return out;
}

}  // namespace wiconet
