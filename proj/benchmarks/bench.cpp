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

#include <benchmark/benchmark.h>
#include <torch/torch.h>

#include "wiconet/context_transformer.hpp"
#include "wiconet/inference.hpp"
#include "wiconet/metrics.hpp"
#include "wiconet/model.hpp"

namespace {

using namespace wiconet;

// Cross-attention at the default token counts (N = 1024, M = 576).
void BM_CrossAttention(benchmark::State& state) {
  torch::NoGradGuard no_grad;
  const int64_t width = state.range(0);
  MultiHeadAttention mha(width, 4);
  auto local = torch::randn({1, 1024, width});
  auto context = torch::randn({1, 576, width});
  for (auto _ : state) benchmark::DoNotOptimize(mha(local, context));
  state.SetItemsProcessed(state.iterations() * 1024);
}
BENCHMARK(BM_CrossAttention)->Arg(64)->Arg(512)->Unit(benchmark::kMillisecond);

void BM_ConfusionAccumulate(benchmark::State& state) {
  const int64_t side = state.range(0);
  auto truth = torch::randint(0, 6, {side, side});
  auto pred = torch::randint(0, 6, {side, side});
  for (auto _ : state) benchmark::DoNotOptimize(accumulate_confusion(pred, truth, 6));
  state.SetItemsProcessed(state.iterations() * side * side);
}
BENCHMARK(BM_ConfusionAccumulate)->Arg(256)->Arg(2048)->Unit(benchmark::kMicrosecond);

void BM_ComputeMetrics(benchmark::State& state) {
  ConfusionMatrix cm(state.range(0));
  for (int64_t i = 0; i < cm.num_classes(); ++i) {
    for (int64_t j = 0; j < cm.num_classes(); ++j) cm.add(i, j, 1 + i * j);
  }
  for (auto _ : state) benchmark::DoNotOptimize(compute_metrics(cm));
}
BENCHMARK(BM_ComputeMetrics)->Arg(6)->Arg(64);

// Sliding prediction over a tile with the toy wide-context model.
void BM_SlidingPredictToy(benchmark::State& state) {
  torch::manual_seed(0);
  SegmentationModel model(ModelConfig::toy(Variant::kWideContext, 4, 64));
  auto predictor = make_predictor(model, BandStats::identity(3));
  RasterTile tile{torch::randn({3, 256, 256}), torch::zeros({256, 256}, torch::kLong), "bench"};
  SlidingOptions options;
  options.stride = state.range(0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(sliding_predict(predictor, tile, model->config().geometry, options));
  }
}
BENCHMARK(BM_SlidingPredictToy)->Arg(64)->Arg(32)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
