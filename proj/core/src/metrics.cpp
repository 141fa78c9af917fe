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

#include "wiconet/metrics.hpp"

#include <fmt/format.h>

#include "wiconet/errors.hpp"

namespace wiconet {

ConfusionMatrix::ConfusionMatrix(int64_t num_classes)
    : num_classes_(num_classes),
      counts_(static_cast<size_t>(num_classes * num_classes), 0) {
  if (num_classes < 1) throw ContractViolation("confusion matrix needs at least one class");
}

void ConfusionMatrix::add(int64_t truth, int64_t predicted, int64_t count) {
  if (truth < 0 || truth >= num_classes_ || predicted < 0 || predicted >= num_classes_) {
    throw DataError(fmt::format("class pair ({}, {}) outside [0, {})", truth, predicted,
                                num_classes_));
  }
  counts_[static_cast<size_t>(truth * num_classes_ + predicted)] += count;
}

void ConfusionMatrix::accumulate(const torch::Tensor& predicted, const torch::Tensor& truth,
                                 std::optional<int64_t> ignore_index) {
  if (predicted.sizes() != truth.sizes()) {
    throw ContractViolation(fmt::format("prediction shape {} differs from truth shape {}",
                                        c10::str(predicted.sizes()), c10::str(truth.sizes())));
  }
  auto p = predicted.to(torch::kLong).reshape(-1);
  auto t = truth.to(torch::kLong).reshape(-1);
  if (ignore_index) {
    auto keep = t.ne(*ignore_index);
    p = p.masked_select(keep);
    t = t.masked_select(keep);
  }
  if (t.numel() == 0) return;
  const auto u = num_classes_;
  if (t.min().item<int64_t>() < 0 || t.max().item<int64_t>() >= u) {
    throw DataError(fmt::format("ground-truth label outside [0, {})", u));
  }
  if (p.min().item<int64_t>() < 0 || p.max().item<int64_t>() >= u) {
    throw DataError(fmt::format("predicted label outside [0, {})", u));
  }
  auto bins = torch::bincount(t * u + p, {}, u * u).contiguous();
  const auto* b = bins.data_ptr<int64_t>();
  for (int64_t i = 0; i < u * u; ++i) counts_[static_cast<size_t>(i)] += b[i];
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
  if (other.num_classes_ != num_classes_) {
    throw ContractViolation("cannot merge confusion matrices of different class counts");
  }
  for (size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  return *this;
}

int64_t ConfusionMatrix::total() const {
  int64_t s = 0;
  for (auto c : counts_) s += c;
  return s;
}

int64_t ConfusionMatrix::trace() const {
  int64_t s = 0;
  for (int64_t k = 0; k < num_classes_; ++k) s += at(k, k);
  return s;
}

int64_t ConfusionMatrix::row_sum(int64_t truth) const {
  int64_t s = 0;
  for (int64_t j = 0; j < num_classes_; ++j) s += at(truth, j);
  return s;
}

int64_t ConfusionMatrix::col_sum(int64_t predicted) const {
  int64_t s = 0;
  for (int64_t i = 0; i < num_classes_; ++i) s += at(i, predicted);
  return s;
}

nlohmann::json ConfusionMatrix::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (int64_t i = 0; i < num_classes_; ++i) {
    std::vector<int64_t> row;
    for (int64_t j = 0; j < num_classes_; ++j) row.push_back(at(i, j));
    rows.push_back(row);
  }
  return rows;
}

ConfusionMatrix accumulate_confusion(const torch::Tensor& predicted, const torch::Tensor& truth,
                                     int64_t num_classes, std::optional<int64_t> ignore_index) {
  ConfusionMatrix cm(num_classes);
  cm.accumulate(predicted, truth, ignore_index);
  return cm;
}

MetricsReport compute_metrics(const ConfusionMatrix& cm, const std::set<int64_t>& excluded) {
  const auto total = cm.total();
  if (total <= 0) throw ContractViolation("metrics of an empty confusion matrix are undefined");
  const auto u = cm.num_classes();
  auto ratio = [](double num, double den) { return den > 0.0 ? num / den : 0.0; };

  MetricsReport r;
  r.scored_pixels = total;
  r.overall_accuracy = static_cast<double>(cm.trace()) / static_cast<double>(total);
  double f1_sum = 0.0;
  double iou_sum = 0.0;
  int64_t counted = 0;
  for (int64_t k = 0; k < u; ++k) {
    const auto tp = static_cast<double>(cm.at(k, k));
    const auto row = static_cast<double>(cm.row_sum(k));
    const auto col = static_cast<double>(cm.col_sum(k));
    ClassMetrics m;
    m.present = row + col > 0.0;
    m.precision = ratio(tp, col);
    m.recall = ratio(tp, row);
    m.f1 = ratio(2.0 * m.precision * m.recall, m.precision + m.recall);
    m.iou = ratio(tp, row + col - tp);
    if (m.present && !excluded.contains(k)) {
      f1_sum += m.f1;
      iou_sum += m.iou;
      ++counted;
    }
    r.per_class.push_back(m);
  }
  if (counted > 0) {
    r.mean_f1 = f1_sum / static_cast<double>(counted);
    r.miou = iou_sum / static_cast<double>(counted);
  }
  return r;
}

nlohmann::json MetricsReport::to_json() const {
  nlohmann::json classes = nlohmann::json::array();
  for (size_t k = 0; k < per_class.size(); ++k) {
    const auto& m = per_class[k];
    classes.push_back({{"class", k},
                       {"precision", m.precision},
                       {"recall", m.recall},
                       {"f1", m.f1},
                       {"iou", m.iou},
                       {"present", m.present}});
  }
  return {{"OA", overall_accuracy},
          {"mean_f1", mean_f1},
          {"miou", miou},
          {"per_class", classes},
          {"scored_pixels", scored_pixels}};
}

}  // namespace wiconet
