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
#include <set>
#include <vector>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

namespace wiconet {

/// counts[i][j] = number of pixels with ground truth i predicted as j.
/// Merging is elementwise addition, so partial matrices reduce in any order.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int64_t num_classes);

  int64_t num_classes() const { return num_classes_; }
  int64_t at(int64_t truth, int64_t predicted) const {
    return counts_[static_cast<size_t>(truth * num_classes_ + predicted)];
  }
  void add(int64_t truth, int64_t predicted, int64_t count = 1);

  // Accumulates integer maps of equal shape. Pixels equal to `ignore_index`
  // in `truth` are skipped; any other label outside [0, u) throws DataError.
  void accumulate(const torch::Tensor& predicted, const torch::Tensor& truth,
                  std::optional<int64_t> ignore_index = std::nullopt);

  ConfusionMatrix& operator+=(const ConfusionMatrix& other);
  bool operator==(const ConfusionMatrix& other) const = default;

  int64_t total() const;
  int64_t trace() const;
  int64_t row_sum(int64_t truth) const;
  int64_t col_sum(int64_t predicted) const;

  nlohmann::json to_json() const;

 private:
  int64_t num_classes_;
  std::vector<int64_t> counts_;
};

ConfusionMatrix accumulate_confusion(const torch::Tensor& predicted, const torch::Tensor& truth,
                                     int64_t num_classes,
                                     std::optional<int64_t> ignore_index = std::nullopt);

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double iou = 0.0;
  // False for classes absent from both truth and prediction; those are left
  // out of the means.
  bool present = false;
};

struct MetricsReport {
  double overall_accuracy = 0.0;
  double mean_f1 = 0.0;
  double miou = 0.0;
  std::vector<ClassMetrics> per_class;
  int64_t scored_pixels = 0;

  // {"OA", "mean_f1", "miou", "per_class": [{"class", "precision", "recall",
  //   "f1", "iou", "present"}...], "scored_pixels"}
  nlohmann::json to_json() const;
};

/// OA = trace / total. Per class k: precision = c_kk / colsum, recall =
/// c_kk / rowsum, F1 = 2PR/(P+R), IoU = c_kk / (rowsum + colsum - c_kk).
/// Zero denominators inside a present class give 0. Classes listed in
/// `excluded` still count towards OA but not towards the means.
MetricsReport compute_metrics(const ConfusionMatrix& cm, const std::set<int64_t>& excluded = {});

}  // namespace wiconet
