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

#include <random>

#include <gtest/gtest.h>

#include "checks.hpp"
#include "oracles.hpp"
#include "wiconet/errors.hpp"
#include "wiconet/inference.hpp"
#include "wiconet/metrics.hpp"

namespace wiconet {
namespace {

ConfusionMatrix from_dense(const std::vector<std::vector<int64_t>>& dense) {
  ConfusionMatrix cm(static_cast<int64_t>(dense.size()));
  for (size_t i = 0; i < dense.size(); ++i) {
    for (size_t j = 0; j < dense.size(); ++j) {
      cm.add(static_cast<int64_t>(i), static_cast<int64_t>(j), dense[i][j]);
    }
  }
  return cm;
}

// ----------------------------------------------------------------------------
// Metrics

TEST(Metrics, WorkedTwoClassExample) {
  auto m = compute_metrics(from_dense({{1, 1}, {0, 2}}));
  EXPECT_DOUBLE_EQ(m.overall_accuracy, 0.75);
  EXPECT_NEAR(m.per_class[0].f1, 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(m.per_class[1].f1, 0.8, 1e-15);
  EXPECT_NEAR(m.per_class[0].iou, 0.5, 1e-15);
  EXPECT_NEAR(m.per_class[1].iou, 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(m.miou, 7.0 / 12.0, 1e-15);
  EXPECT_NEAR(m.mean_f1, (2.0 / 3.0 + 0.8) / 2.0, 1e-15);
  EXPECT_EQ(m.scored_pixels, 4);
  auto j = m.to_json();
  for (const char* key : {"OA", "mean_f1", "miou", "per_class"}) EXPECT_TRUE(j.contains(key));
  EXPECT_EQ(j.at("per_class").size(), 2u);
}

TEST(Metrics, MatchesScalarOracle) { EXPECT_LE(checks::metrics_oracle_error(1000), 1e-12); }

TEST(Metrics, BinaryF1IouIdentity) { EXPECT_LE(checks::binary_identity_error(500), 1e-12); }

TEST(Metrics, PerfectAndPermutedMatrices) {
  auto perfect = compute_metrics(from_dense({{5, 0, 0}, {0, 3, 0}, {0, 0, 9}}));
  EXPECT_DOUBLE_EQ(perfect.overall_accuracy, 1.0);
  EXPECT_DOUBLE_EQ(perfect.miou, 1.0);
  EXPECT_DOUBLE_EQ(perfect.mean_f1, 1.0);

  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int64_t> d(0, 20);
  std::vector<std::vector<int64_t>> dense(4, std::vector<int64_t>(4));
  for (auto& row : dense) {
    for (auto& v : row) v = d(rng);
  }
  const std::vector<size_t> perm = {2, 0, 3, 1};
  std::vector<std::vector<int64_t>> permuted(4, std::vector<int64_t>(4));
  for (size_t i = 0; i < 4; ++i) {
    for (size_t j = 0; j < 4; ++j) permuted[perm[i]][perm[j]] = dense[i][j];
  }
  auto a = compute_metrics(from_dense(dense));
  auto b = compute_metrics(from_dense(permuted));
  EXPECT_NEAR(a.overall_accuracy, b.overall_accuracy, 1e-15);
  EXPECT_NEAR(a.miou, b.miou, 1e-15);
  EXPECT_NEAR(a.mean_f1, b.mean_f1, 1e-15);
  for (size_t k = 0; k < 4; ++k) EXPECT_NEAR(a.per_class[k].iou, b.per_class[perm[k]].iou, 1e-15);
}

TEST(Metrics, AbsentAndExcludedClasses) {
  auto cm = from_dense({{4, 1, 0}, {2, 3, 0}, {0, 0, 0}});
  auto m = compute_metrics(cm);
  EXPECT_FALSE(m.per_class[2].present);
  auto o = oracle::scalar_metrics({{4, 1, 0}, {2, 3, 0}, {0, 0, 0}});
  EXPECT_NEAR(m.miou, o.miou, 1e-15);
  EXPECT_NEAR(m.miou, (m.per_class[0].iou + m.per_class[1].iou) / 2.0, 1e-15);

  auto ex = compute_metrics(cm, {1});
  EXPECT_DOUBLE_EQ(ex.overall_accuracy, m.overall_accuracy);
  EXPECT_NEAR(ex.miou, m.per_class[0].iou, 1e-15);
  EXPECT_NEAR(ex.mean_f1, m.per_class[0].f1, 1e-15);
}

TEST(Confusion, AccumulateAndMergeAdditivity) {
  torch::manual_seed(7);
  auto truth = torch::randint(0, 5, {3, 17, 13});
  auto pred = torch::randint(0, 5, {3, 17, 13});
  auto whole = accumulate_confusion(pred, truth, 5);
  ConfusionMatrix parts(5);
  for (int64_t i = 0; i < 3; ++i) parts += accumulate_confusion(pred[i], truth[i], 5);
  EXPECT_EQ(whole, parts);
  EXPECT_EQ(whole.total(), 3 * 17 * 13);
  int64_t diag = (truth == pred).sum().item<int64_t>();
  EXPECT_EQ(whole.trace(), diag);
  for (int64_t k = 0; k < 5; ++k) {
    EXPECT_EQ(whole.row_sum(k), (truth == k).sum().item<int64_t>());
    EXPECT_EQ(whole.col_sum(k), (pred == k).sum().item<int64_t>());
  }
}

TEST(Confusion, IgnoreIndexAndBadLabels) {
  auto truth = torch::tensor({0, 255, 1, 1}, torch::kLong);
  auto pred = torch::tensor({0, 1, 1, 0}, torch::kLong);
  auto cm = accumulate_confusion(pred, truth, 2, 255);
  EXPECT_EQ(cm.total(), 3);
  EXPECT_EQ(cm.at(1, 0), 1);
  EXPECT_THROW(accumulate_confusion(pred, truth, 2), DataError);
  EXPECT_THROW(accumulate_confusion(pred, truth.view({2, 2}), 2, 255), ContractViolation);
  ConfusionMatrix a(2);
  ConfusionMatrix b(3);
  EXPECT_THROW(a += b, ContractViolation);
}

// ----------------------------------------------------------------------------
// Sliding inference

TEST(WindowStarts, Layouts) {
  EXPECT_EQ(window_starts(512, 256, 256), (std::vector<int64_t>{0, 256}));
  EXPECT_EQ(window_starts(600, 256, 256), (std::vector<int64_t>{0, 256, 344}));
  EXPECT_EQ(window_starts(256, 256, 64), (std::vector<int64_t>{0}));
  EXPECT_EQ(window_starts(300, 256, 64), (std::vector<int64_t>{0, 44}));
  EXPECT_THROW(window_starts(200, 256, 256), GeometryError);
  EXPECT_THROW(window_starts(512, 256, 0), ConfigError);
}

TEST(SlidingPredict, NonOverlappingCoverage) {
  RasterTile tile{torch::randn({3, 512, 512}), torch::zeros({512, 512}, torch::kLong), "t"};
  WindowGeometry g{256, 256, 3, 4};
  int64_t windows = 0;
  WindowPredictor constant = [&](const torch::Tensor& local, const torch::Tensor& context) {
    EXPECT_EQ(local.sizes(), torch::IntArrayRef({local.size(0), 3, 256, 256}));
    EXPECT_EQ(context.sizes(), torch::IntArrayRef({local.size(0), 3, 192, 192}));
    windows += local.size(0);
    auto out = torch::zeros({local.size(0), 4, 256, 256});
    out.select(1, 2).fill_(1.0);
    return out;
  };
  auto p = sliding_predict(constant, tile, g, {.stride = 0, .batch_size = 3, .keep_logits = true});
  EXPECT_EQ(windows, 4);
  EXPECT_EQ(p.classes.sizes(), torch::IntArrayRef({512, 512}));
  EXPECT_TRUE((p.classes == 2).all().item<bool>());
  ASSERT_TRUE(p.logits.has_value());
  EXPECT_EQ(p.logits->sizes(), torch::IntArrayRef({4, 512, 512}));
}

TEST(SlidingPredict, OverlapAveragingMatchesOracle) { EXPECT_LE(checks::stitching_error(), 1e-5); }

TEST(SlidingPredict, BatchSizeDoesNotChangeResult) {
  torch::manual_seed(8);
  RasterTile tile{torch::randn({2, 40, 36}), torch::zeros({40, 36}, torch::kLong), "t"};
  WindowGeometry g{16, 16, 3, 4};
  auto w = torch::randn({3, 2});
  WindowPredictor f = [&](const torch::Tensor& local, const torch::Tensor&) {
    return torch::einsum("kc,bchw->bkhw", {w, local});
  };
  auto a = sliding_predict(f, tile, g, {.stride = 5, .batch_size = 1, .keep_logits = true});
  auto b = sliding_predict(f, tile, g, {.stride = 5, .batch_size = 64, .keep_logits = true});
  EXPECT_TRUE(torch::equal(a.classes, b.classes));
  EXPECT_TRUE(torch::allclose(*a.logits, *b.logits, 1e-6, 1e-6));
  // A pointwise predictor is unaffected by averaging.
  auto direct = argmax_lowest(torch::einsum("kc,chw->khw", {w, tile.pixels}));
  EXPECT_TRUE(torch::equal(a.classes, direct));
}

TEST(ArgmaxLowest, TiesGoToLowestIndex) {
  auto logits = torch::tensor({1.0f, 2.0f, 0.0f, 2.0f, 2.0f, 0.0f, 2.0f, 1.0f, 0.0f})
                    .view({3, 1, 3});
  auto idx = argmax_lowest(logits);
  EXPECT_EQ(idx[0][0].item<int64_t>(), 1);
  EXPECT_EQ(idx[0][1].item<int64_t>(), 0);
  EXPECT_EQ(idx[0][2].item<int64_t>(), 0);
  auto flat = torch::zeros({5, 2, 2});
  EXPECT_TRUE((argmax_lowest(flat) == 0).all().item<bool>());
}

}  // namespace
}  // namespace wiconet
