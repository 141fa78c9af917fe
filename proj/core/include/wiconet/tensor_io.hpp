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
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

namespace wiconet {

// Rasters live on disk as NumPy .npy arrays (v1.0 header, little endian, C
// order). Images are float32 [bands, H, W]; label maps are int32 [H, W].
// Supported dtypes: f4, f8, i4, i8, u1.
void save_npy(const std::filesystem::path& path, const torch::Tensor& tensor);
torch::Tensor load_npy(const std::filesystem::path& path);

// ----------------------------------------------------------------------------
// Named-tensor checkpoints.
//
// Layout:
//   8 bytes   magic "WCNTCKPT"
//   8 bytes   little-endian u64 manifest length
//   manifest  JSON {"format": 1, "tensors": [{"name", "shape", "dtype",
//             "offset", "nbytes"}...], "metadata": {...}}
//   payload   raw little-endian tensor data, offsets relative to payload start

struct TensorRecord {
  std::string name;
  std::vector<int64_t> shape;
  std::string dtype;
};

struct NamedTensors {
  std::map<std::string, torch::Tensor> tensors;
  nlohmann::json metadata = nlohmann::json::object();
};

void save_named_tensors(const std::filesystem::path& path, const NamedTensors& contents);
NamedTensors load_named_tensors(const std::filesystem::path& path);
// Reads only the manifest.
std::vector<TensorRecord> read_manifest(const std::filesystem::path& path);

/// Copies every parameter and buffer of `module` into a NamedTensors map.
NamedTensors module_state(const torch::nn::Module& module);

/// Loads parameters and buffers into `module`. Names, shapes and dtypes must
/// match exactly in both directions; any mismatch throws DataError.
void load_module_state(torch::nn::Module& module, const NamedTensors& contents,
                       const std::string& prefix = "");

std::string dtype_name(torch::ScalarType type);

}  // namespace wiconet
