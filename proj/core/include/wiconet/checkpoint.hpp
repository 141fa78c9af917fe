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

#include <nlohmann/json.hpp>

#include "wiconet/model.hpp"
#include "wiconet/tensor_io.hpp"
#include "wiconet/windowing.hpp"

namespace wiconet {

void to_json(nlohmann::json& j, const BandStats& s);
void from_json(const nlohmann::json& j, BandStats& s);

// Sidecar path for a checkpoint: "<path>.json".
std::filesystem::path sidecar_path(const std::filesystem::path& checkpoint);

/// Writes model weights as named tensors plus a JSON sidecar holding the
/// model config, band statistics and `metadata`.
void save_model_checkpoint(const std::filesystem::path& path, const SegmentationModel& model,
                           const BandStats& stats, const nlohmann::json& metadata = {},
                           const std::map<std::string, torch::Tensor>& extra = {});

struct LoadedModel {
  SegmentationModel model{nullptr};
  BandStats stats;
  nlohmann::json metadata;
  // Tensors stored alongside the weights (e.g. optimiser state).
  std::map<std::string, torch::Tensor> extra;
};

// Rebuilds the model from the sidecar and loads weights strictly.
LoadedModel load_model_checkpoint(const std::filesystem::path& path);

}  // namespace wiconet
