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

#include "wiconet/checkpoint.hpp"

#include <fstream>

#include <fmt/format.h>

#include "wiconet/errors.hpp"

namespace wiconet {

namespace {
constexpr const char* kModelPrefix = "model/";
constexpr const char* kExtraPrefix = "extra/";
}  // namespace

void to_json(nlohmann::json& j, const BandStats& s) {
  j = {{"mean", s.mean}, {"stddev", s.stddev}};
}

void from_json(const nlohmann::json& j, BandStats& s) {
  s.mean = j.at("mean").get<std::vector<double>>();
  s.stddev = j.at("stddev").get<std::vector<double>>();
  if (s.mean.size() != s.stddev.size()) throw DataError("band statistics size mismatch");
}

std::filesystem::path sidecar_path(const std::filesystem::path& checkpoint) {
  return checkpoint.string() + ".json";
}

void save_model_checkpoint(const std::filesystem::path& path, const SegmentationModel& model,
                           const BandStats& stats, const nlohmann::json& metadata,
                           const std::map<std::string, torch::Tensor>& extra) {
  NamedTensors contents;
  for (auto& [name, t] : module_state(*model).tensors) {
    contents.tensors.emplace(kModelPrefix + name, std::move(t));
  }
  for (const auto& [name, t] : extra) contents.tensors.emplace(kExtraPrefix + name, t);
  contents.metadata = metadata.is_null() ? nlohmann::json::object() : metadata;
  save_named_tensors(path, contents);

  nlohmann::json sidecar = {{"model", model->config()}, {"band_stats", stats},
                            {"metadata", contents.metadata}};
  std::ofstream out(sidecar_path(path));
  if (!out) throw IoError(fmt::format("cannot write '{}'", sidecar_path(path).string()));
  out << sidecar.dump(2) << "\n";
}

LoadedModel load_model_checkpoint(const std::filesystem::path& path) {
  const auto side = sidecar_path(path);
  std::ifstream in(side);
  if (!in) throw IoError(fmt::format("missing checkpoint sidecar '{}'", side.string()));
  nlohmann::json sidecar;
  try {
    in >> sidecar;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(fmt::format("corrupt sidecar '{}': {}", side.string(), e.what()));
  }
  LoadedModel out;
  out.model = SegmentationModel(sidecar.at("model").get<ModelConfig>());
  out.stats = sidecar.at("band_stats").get<BandStats>();

  auto contents = load_named_tensors(path);
  out.metadata = contents.metadata;
  NamedTensors weights;
  for (auto& [name, t] : contents.tensors) {
    if (name.rfind(kModelPrefix, 0) == 0) {
      weights.tensors.emplace(name, t);
    } else if (name.rfind(kExtraPrefix, 0) == 0) {
      out.extra.emplace(name.substr(std::char_traits<char>::length(kExtraPrefix)), t);
    } else {
      throw DataError(fmt::format("unexpected tensor '{}' in '{}'", name, path.string()));
    }
  }
  load_module_state(*out.model, weights, kModelPrefix);
  return out;
}

}  // namespace wiconet
