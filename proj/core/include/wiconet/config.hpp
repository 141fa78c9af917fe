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
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wiconet/model.hpp"
#include "wiconet/training.hpp"

namespace wiconet {

// Environment variable naming the default root for experiment directories.
inline constexpr const char* kExperimentRootEnv = "WICONET_EXPERIMENT_ROOT";

struct DataConfig {
  std::filesystem::path root;
  std::string manifest = "manifest.tsv";
  // Unset: taken from the dataset's dataset.json, else grid.
  std::optional<WindowSampling> sampling;
  bool normalize = true;
};

struct EvalConfig {
  int64_t stride = 0;  // sliding stride; 0 = local window size
  int64_t batch_size = 8;
  std::set<int64_t> excluded_classes;
};

struct SynthConfig {
  int64_t train = 2000;
  int64_t val = 400;
  int64_t test = 400;
  int64_t marker_size = 0;
  double noise_std = 1.0;
  double marker_amplitude = 3.0;
};

/// Everything that determines a run. Serialises to a single JSON document;
/// `overrides` lists the "key.path=value" edits applied on top of the file.
struct ExperimentConfig {
  std::string name = "experiment";
  uint64_t seed = 0;
  int64_t workers = 1;
  std::filesystem::path output_dir;
  DataConfig data;
  ModelConfig model;
  TrainConfig train;
  EvalConfig eval;
  SynthConfig synth;
  std::vector<std::string> overrides;

  // output_dir, else $WICONET_EXPERIMENT_ROOT/<name>, else ./experiments/<name>.
  std::filesystem::path resolved_output_dir() const;
  void validate() const;
};

void to_json(nlohmann::json& j, const ExperimentConfig& c);
void from_json(const nlohmann::json& j, ExperimentConfig& c);

// Applies "a.b.c=value" to a JSON document. `value` is parsed as JSON when
// possible and taken as a string otherwise.
void apply_override(nlohmann::json& doc, const std::string& assignment);

/// Reads a config file (empty path = defaults), then applies overrides.
ExperimentConfig load_config(const std::filesystem::path& path,
                             const std::vector<std::string>& overrides = {});

void save_config(const std::filesystem::path& path, const ExperimentConfig& config);

}  // namespace wiconet
