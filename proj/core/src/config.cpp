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

#include "wiconet/config.hpp"

#include <cstdlib>
#include <fstream>

#include <fmt/format.h>

#include "wiconet/errors.hpp"

namespace wiconet {

std::filesystem::path ExperimentConfig::resolved_output_dir() const {
  if (!output_dir.empty()) return output_dir;
  if (const char* root = std::getenv(kExperimentRootEnv); root && *root) {
    return std::filesystem::path(root) / name;
  }
  return std::filesystem::path("experiments") / name;
}

void ExperimentConfig::validate() const {
  if (name.empty()) throw ConfigError("experiment name must not be empty");
  if (workers < 1) throw ConfigError("workers must be at least 1");
  model.validate();
  train.validate();
  if (eval.stride < 0 || eval.batch_size < 1) throw ConfigError("invalid eval stride/batch size");
  if (synth.train < 0 || synth.val < 0 || synth.test < 0) {
    throw ConfigError("synthetic split sizes must be non-negative");
  }
  for (auto k : eval.excluded_classes) {
    if (k < 0 || k >= model.num_classes) {
      throw ConfigError(fmt::format("excluded class {} outside [0, {})", k, model.num_classes));
    }
  }
}

void to_json(nlohmann::json& j, const ExperimentConfig& c) {
  nlohmann::json train = c.train;
  train.erase("seed");
  j = {
      {"name", c.name},
      {"seed", c.seed},
      {"workers", c.workers},
      {"output_dir", c.output_dir.string()},
      {"data",
       {{"root", c.data.root.string()},
        {"manifest", c.data.manifest},
        {"sampling", c.data.sampling ? nlohmann::json(sampling_name(*c.data.sampling))
                                     : nlohmann::json()},
        {"normalize", c.data.normalize}}},
      {"model", c.model},
      {"train", train},
      {"eval",
       {{"stride", c.eval.stride},
        {"batch_size", c.eval.batch_size},
        {"excluded_classes", c.eval.excluded_classes}}},
      {"synth",
       {{"train", c.synth.train},
        {"val", c.synth.val},
        {"test", c.synth.test},
        {"marker_size", c.synth.marker_size},
        {"noise_std", c.synth.noise_std},
        {"marker_amplitude", c.synth.marker_amplitude}}},
      {"overrides", c.overrides},
  };
}

namespace {

void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> known,
                    const std::string& where) {
  if (!j.is_object()) throw ConfigError(fmt::format("'{}' must be an object", where));
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw ConfigError(fmt::format("unknown config key '{}{}'", where, key));
  }
}

}  // namespace

void from_json(const nlohmann::json& j, ExperimentConfig& c) {
  reject_unknown(j, {"name", "seed", "workers", "output_dir", "data", "model", "train", "eval",
                     "synth", "overrides"},
                 "");
  ExperimentConfig d;
  c.name = j.value("name", d.name);
  c.seed = j.value("seed", d.seed);
  c.workers = j.value("workers", d.workers);
  c.output_dir = j.value("output_dir", std::string());
  c.data = d.data;
  if (j.contains("data")) {
    const auto& x = j.at("data");
    reject_unknown(x, {"root", "manifest", "sampling", "normalize"}, "data.");
    c.data.root = x.value("root", std::string());
    c.data.manifest = x.value("manifest", d.data.manifest);
    if (x.contains("sampling") && !x.at("sampling").is_null()) {
      c.data.sampling = parse_sampling(x.at("sampling").get<std::string>());
    }
    c.data.normalize = x.value("normalize", d.data.normalize);
  }
  if (j.contains("model")) {
    const auto& x = j.at("model");
    reject_unknown(x, {"variant", "num_classes", "in_channels", "geometry", "local_encoder",
                       "context_encoder", "transformer", "head_width"},
                   "model.");
    if (x.contains("geometry")) {
      reject_unknown(x.at("geometry"),
                     {"local_height", "local_width", "ratio", "context_downsample"},
                     "model.geometry.");
    }
    if (x.contains("local_encoder")) {
      reject_unknown(x.at("local_encoder"), {"base_width", "stage_blocks"},
                     "model.local_encoder.");
    }
    if (x.contains("context_encoder")) {
      reject_unknown(x.at("context_encoder"), {"base_width"}, "model.context_encoder.");
    }
    if (x.contains("transformer")) {
      reject_unknown(x.at("transformer"),
                     {"blocks", "heads", "patch", "width", "mlp_ratio", "dropout",
                      "context_self_attention", "position_init_std"},
                     "model.transformer.");
    }
  }
  if (j.contains("train")) {
    reject_unknown(j.at("train"),
                   {"epochs", "batch_size", "base_lr", "momentum", "lr_power", "weight_decay",
                    "seed", "augment", "flip_probability", "random_crop", "min_crop_scale",
                    "ignore_index", "eval_batch_size"},
                   "train.");
  }
  c.model = j.contains("model") ? j.at("model").get<ModelConfig>() : d.model;
  c.train = j.contains("train") ? j.at("train").get<TrainConfig>() : d.train;
  c.train.seed = c.seed;
  c.eval = d.eval;
  if (j.contains("eval")) {
    const auto& x = j.at("eval");
    reject_unknown(x, {"stride", "batch_size", "excluded_classes"}, "eval.");
    c.eval.stride = x.value("stride", d.eval.stride);
    c.eval.batch_size = x.value("batch_size", d.eval.batch_size);
    c.eval.excluded_classes = x.value("excluded_classes", d.eval.excluded_classes);
  }
  c.synth = d.synth;
  if (j.contains("synth")) {
    const auto& x = j.at("synth");
    reject_unknown(x, {"train", "val", "test", "marker_size", "noise_std", "marker_amplitude"},
                   "synth.");
    c.synth.train = x.value("train", d.synth.train);
    c.synth.val = x.value("val", d.synth.val);
    c.synth.test = x.value("test", d.synth.test);
    c.synth.marker_size = x.value("marker_size", d.synth.marker_size);
    c.synth.noise_std = x.value("noise_std", d.synth.noise_std);
    c.synth.marker_amplitude = x.value("marker_amplitude", d.synth.marker_amplitude);
  }
  c.overrides = j.value("overrides", std::vector<std::string>{});
}

void apply_override(nlohmann::json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError(fmt::format("override '{}' is not of the form key.path=value", assignment));
  }
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  nlohmann::json value;
  try {
    value = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error&) {
    value = text;
  }
  nlohmann::json* node = &doc;
  size_t start = 0;
  for (;;) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot - start);
    if (part.empty()) throw ConfigError(fmt::format("empty path component in '{}'", key));
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    if (!node->is_object() && !node->is_null()) {
      throw ConfigError(fmt::format("'{}' does not name an object", key.substr(0, dot)));
    }
    start = dot + 1;
  }
}

ExperimentConfig load_config(const std::filesystem::path& path,
                             const std::vector<std::string>& overrides) {
  nlohmann::json doc = nlohmann::json::object();
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw IoError(fmt::format("cannot read config '{}'", path.string()));
    try {
      doc = nlohmann::json::parse(in, nullptr, true, /*ignore_comments=*/true);
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError(fmt::format("config '{}': {}", path.string(), e.what()));
    }
  }
  auto recorded = doc.value("overrides", std::vector<std::string>{});
  for (const auto& o : overrides) {
    apply_override(doc, o);
    recorded.push_back(o);
  }
  doc["overrides"] = recorded;
  ExperimentConfig c;
  try {
    c = doc.get<ExperimentConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(fmt::format("invalid config: {}", e.what()));
  }
  c.validate();
  return c;
}

void save_config(const std::filesystem::path& path, const ExperimentConfig& config) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError(fmt::format("cannot write '{}'", path.string()));
  out << nlohmann::json(config).dump(2) << "\n";
}

}  // namespace wiconet
