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
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include "wiconet/metrics.hpp"
#include "wiconet/model.hpp"
#include "wiconet/tensor_io.hpp"
#include "wiconet/windowing.hpp"

namespace wiconet {

// ----------------------------------------------------------------------------
// Schedules. `iteration` counts optimiser steps already taken.

/// Context-loss weight (1 - it/total)^2.
double alpha_schedule(int64_t iteration, int64_t total);

/// Learning rate base * (1 - it/total)^power.
double lr_schedule(int64_t iteration, int64_t total, double base = 0.1, double power = 1.5);

// ----------------------------------------------------------------------------
// Loss

/// Mean per-pixel cross-entropy over non-ignored pixels. Throws
/// ContractViolation when every pixel is ignored.
torch::Tensor mean_cross_entropy(const torch::Tensor& logits, const torch::Tensor& labels,
                                 std::optional<int64_t> ignore_index = std::nullopt);

struct LossTerms {
  torch::Tensor total;
  torch::Tensor local;
  torch::Tensor context;  // undefined without a context branch
};

/// CE(P_l, L_l) + alpha * CE(P_c, L_c). The context term is omitted when no
/// context logits are given.
LossTerms dual_loss(const torch::Tensor& local_logits, const torch::Tensor& local_labels,
                    const std::optional<torch::Tensor>& context_logits,
                    const std::optional<torch::Tensor>& context_labels, double alpha,
                    std::optional<int64_t> ignore_index = std::nullopt);

// ----------------------------------------------------------------------------
// Datasets

class WindowDataset {
 public:
  virtual ~WindowDataset() = default;
  virtual int64_t size() const = 0;
  // Deterministic in `index`.
  virtual WindowPair get(int64_t index) const = 0;
};

class PairDataset final : public WindowDataset {
 public:
  explicit PairDataset(std::vector<WindowPair> pairs) : pairs_(std::move(pairs)) {}
  int64_t size() const override { return static_cast<int64_t>(pairs_.size()); }
  WindowPair get(int64_t index) const override { return pairs_.at(static_cast<size_t>(index)); }
  const std::vector<WindowPair>& pairs() const { return pairs_; }

 private:
  std::vector<WindowPair> pairs_;
};

enum class WindowSampling {
  kCentered,  // one window at the centre of each tile
  kGrid,      // every window of a non-overlapping grid over each tile
};

std::string sampling_name(WindowSampling s);
WindowSampling parse_sampling(const std::string& name);

class TileWindowDataset final : public WindowDataset {
 public:
  TileWindowDataset(std::vector<RasterTile> tiles, WindowGeometry geometry,
                    WindowSampling sampling);
  int64_t size() const override { return static_cast<int64_t>(index_.size()); }
  WindowPair get(int64_t index) const override;
  const std::vector<RasterTile>& tiles() const { return tiles_; }

 private:
  std::vector<RasterTile> tiles_;
  WindowGeometry geometry_;
  std::vector<std::pair<size_t, PixelOrigin>> index_;
};

struct Batch {
  torch::Tensor local_image;
  torch::Tensor context_image;
  torch::Tensor local_label;
  torch::Tensor context_label;
};

// Stacks pairs and normalises both images with `stats`.
Batch collate(const std::vector<WindowPair>& pairs, const BandStats& stats);

// ----------------------------------------------------------------------------
// Optimiser

/// Heavy-ball SGD: buf = momentum * buf + (grad + wd * p); p -= lr * buf.
class SgdMomentum {
 public:
  SgdMomentum(std::vector<torch::Tensor> params, double momentum, double weight_decay = 0.0);

  void zero_grad();
  void step(double lr);

  // Momentum buffers keyed by parameter index.
  std::map<std::string, torch::Tensor> state() const;
  void load_state(const std::map<std::string, torch::Tensor>& state);

 private:
  std::vector<torch::Tensor> params_;
  std::vector<torch::Tensor> buffers_;
  double momentum_;
  double weight_decay_;
};

// ----------------------------------------------------------------------------
// Training loop

struct TrainConfig {
  int64_t epochs = 50;
  int64_t batch_size = 32;
  double base_lr = 0.1;
  double momentum = 0.9;
  double lr_power = 1.5;
  double weight_decay = 0.0;
  uint64_t seed = 0;
  bool augment = true;
  AugmentOptions augment_options;
  std::optional<int64_t> ignore_index;
  int64_t eval_batch_size = 32;
  std::filesystem::path checkpoint_dir;

  void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

struct EpochRecord {
  int64_t epoch = 0;
  int64_t iteration = 0;
  double train_loss = 0.0;
  double val_oa = 0.0;
  double val_miou = 0.0;
  double seconds = 0.0;
};

struct TrainReport {
  int64_t best_epoch = -1;
  double best_oa = 0.0;
  int64_t iterations = 0;
  int64_t total_iterations = 0;
  std::vector<EpochRecord> history;
  std::filesystem::path best_checkpoint;

  nlohmann::json to_json() const;
};

/// Evaluates local-branch predictions of every pair in `data` (eval mode).
ConfusionMatrix evaluate_windows(SegmentationModel& model, const WindowDataset& data,
                                 const BandStats& stats, int64_t batch_size,
                                 std::optional<int64_t> ignore_index = std::nullopt);

/// SGD with per-iteration learning-rate and alpha schedules, per-sample
/// augmentation, validation OA after every epoch, and best-OA checkpointing.
///
/// Files written under `config.checkpoint_dir` (when set):
///   best.ckpt(.json)   weights with the highest validation OA so far
///   last.ckpt(.json)   end-of-epoch weights plus optimiser state (resume)
///   train_log.jsonl    one record per iteration and per epoch
///   report.json        final TrainReport
class Trainer {
 public:
  Trainer(SegmentationModel model, TrainConfig config, BandStats stats);

  TrainReport fit(const WindowDataset& train, const WindowDataset& val,
                  const std::optional<std::filesystem::path>& resume_from = std::nullopt);

  // Called with every log record in addition to the JSONL file.
  std::function<void(const nlohmann::json&)> on_log;

  SegmentationModel& model() { return model_; }

 private:
  SegmentationModel model_;
  TrainConfig config_;
  BandStats stats_;
};

}  // namespace wiconet
