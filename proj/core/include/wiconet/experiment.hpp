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

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wiconet/config.hpp"
#include "wiconet/metrics.hpp"
#include "wiconet/training.hpp"
#include "wiconet/windowing.hpp"

namespace wiconet {

// ----------------------------------------------------------------------------
// Dataset layout on disk
//
//   <root>/manifest.tsv     one record per tile: id \t image \t label \t role
//                           ('#' starts a comment line; paths are relative to
//                           the manifest directory)
//   <root>/images/<id>.npy  float32 [bands, H, W]
//   <root>/labels/<id>.npy  int32 [H, W]
//   <root>/dataset.json     optional: {"sampling": "centered" | "grid", ...}

struct ManifestRecord {
  std::string id;
  std::filesystem::path image;
  std::filesystem::path label;
  SplitRole role = SplitRole::kTrain;
};

std::vector<ManifestRecord> read_manifest_file(const std::filesystem::path& path);
void write_manifest_file(const std::filesystem::path& path,
                         const std::vector<ManifestRecord>& records,
                         const std::vector<std::string>& comments = {});

RasterTile load_tile(const ManifestRecord& record, const std::filesystem::path& base_dir);
// Writes images/<id>.npy and labels/<id>.npy under `root`; returns the record.
ManifestRecord save_tile(const RasterTile& tile, SplitRole role,
                         const std::filesystem::path& root);

// Tiles of one role from the configured dataset.
std::vector<RasterTile> load_split(const ExperimentConfig& config, SplitRole role);
WindowSampling resolve_sampling(const ExperimentConfig& config);

// ----------------------------------------------------------------------------
// Commands

using LogSink = std::function<void(const std::string&)>;

/// Writes a synthetic context-dependency dataset to config.data.root.
/// Returns the number of tiles written.
int64_t cmd_synth(const ExperimentConfig& config, const LogSink& log = {});

struct TrainOutcome {
  std::filesystem::path run_dir;
  TrainReport report;
};

/// Trains in <output dir>: config.json (resolved), best/last checkpoints,
/// train_log.jsonl and report.json.
TrainOutcome cmd_train(const ExperimentConfig& config,
                       const std::optional<std::filesystem::path>& resume_from = std::nullopt,
                       const LogSink& log = {});

/// Scores a checkpoint on one split ("train", "val" or "test"). Centred
/// datasets are scored window by window; others by sliding prediction over
/// whole tiles. All pixels feed one global confusion matrix.
MetricsReport cmd_eval(const ExperimentConfig& config, const std::filesystem::path& checkpoint,
                       const std::string& split,
                       const std::optional<std::filesystem::path>& report_path = std::nullopt);

/// Predicts a single-band int32 class raster for a float32 [bands, H, W] .npy
/// image and writes it to `output`.
torch::Tensor cmd_predict(const ExperimentConfig& config, const std::filesystem::path& checkpoint,
                          const std::filesystem::path& image, const std::filesystem::path& output);

}  // namespace wiconet
