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

#include "wiconet/experiment.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "wiconet/checkpoint.hpp"
#include "wiconet/errors.hpp"
#include "wiconet/inference.hpp"
#include "wiconet/synth.hpp"
#include "wiconet/tensor_io.hpp"

namespace wiconet {

namespace fs = std::filesystem;

std::vector<ManifestRecord> read_manifest_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("dataset manifest '{}' not found", path.string()));
  std::vector<ManifestRecord> out;
  std::string line;
  int64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, '\t')) fields.push_back(field);
    if (fields.size() != 4) {
      throw DataError(fmt::format("{}:{}: expected 4 tab-separated fields, got {}", path.string(),
                                  line_no, fields.size()));
    }
    out.push_back({fields[0], fields[1], fields[2], parse_role(fields[3])});
  }
  return out;
}

void write_manifest_file(const fs::path& path, const std::vector<ManifestRecord>& records,
                         const std::vector<std::string>& comments) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError(fmt::format("cannot write '{}'", path.string()));
  for (const auto& c : comments) out << "# " << c << "\n";
  for (const auto& r : records) {
    out << r.id << '\t' << r.image.generic_string() << '\t' << r.label.generic_string() << '\t'
        << role_name(r.role) << '\n';
  }
}

RasterTile load_tile(const ManifestRecord& record, const fs::path& base_dir) {
  RasterTile tile;
  tile.id = record.id;
  tile.pixels = load_npy(base_dir / record.image).to(torch::kFloat);
  if (tile.pixels.dim() == 2) tile.pixels = tile.pixels.unsqueeze(0);
  auto labels = load_npy(base_dir / record.label);
  if (labels.is_floating_point()) {
    throw DataError(fmt::format("label raster for '{}' is not integer typed", record.id));
  }
  tile.labels = labels.to(torch::kLong);
  if (tile.labels.dim() == 3 && tile.labels.size(0) == 1) tile.labels = tile.labels.squeeze(0);
  return tile;
}

ManifestRecord save_tile(const RasterTile& tile, SplitRole role, const fs::path& root) {
  ManifestRecord r{tile.id, fs::path("images") / (tile.id + ".npy"),
                   fs::path("labels") / (tile.id + ".npy"), role};
  save_npy(root / r.image, tile.pixels.to(torch::kFloat));
  save_npy(root / r.label, tile.labels.to(torch::kInt));
  return r;
}

namespace {

fs::path manifest_path(const ExperimentConfig& c) {
  if (c.data.root.empty()) throw ConfigError("data.root is not set");
  return c.data.root / c.data.manifest;
}

nlohmann::json dataset_info(const ExperimentConfig& c) {
  std::ifstream in(c.data.root / "dataset.json");
  if (!in) return nlohmann::json::object();
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(fmt::format("corrupt dataset.json: {}", e.what()));
  }
}

}  // namespace

std::vector<RasterTile> load_split(const ExperimentConfig& config, SplitRole role) {
  const auto path = manifest_path(config);
  const auto records = read_manifest_file(path);
  std::vector<RasterTile> tiles;
  for (const auto& r : records) {
    if (r.role == role) tiles.push_back(load_tile(r, path.parent_path()));
  }
  return tiles;
}

WindowSampling resolve_sampling(const ExperimentConfig& config) {
  if (config.data.sampling) return *config.data.sampling;
  const auto info = dataset_info(config);
  if (info.contains("sampling")) return parse_sampling(info.at("sampling").get<std::string>());
  return WindowSampling::kGrid;
}

// ----------------------------------------------------------------------------

int64_t cmd_synth(const ExperimentConfig& config, const LogSink& log) {
  if (config.data.root.empty()) throw ConfigError("data.root is not set");
  SynthOptions o;
  o.num_classes = config.model.num_classes;
  o.geometry = config.model.geometry;
  o.seed = config.seed;
  o.bands = config.model.in_channels;
  o.marker_size = config.synth.marker_size;
  o.noise_std = config.synth.noise_std;
  o.marker_amplitude = config.synth.marker_amplitude;
  o.samples = config.synth.train + config.synth.val + config.synth.test;
  o.validate();

  const auto& root = config.data.root;
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec) throw IoError(fmt::format("cannot create '{}': {}", root.string(), ec.message()));

  std::vector<ManifestRecord> records;
  for (int64_t i = 0; i < o.samples; ++i) {
    const auto role = i < config.synth.train                      ? SplitRole::kTrain
                      : i < config.synth.train + config.synth.val ? SplitRole::kVal
                                                                  : SplitRole::kTest;
    records.push_back(save_tile(synth_sample(o, i).tile, role, root));
    if (log && (i + 1) % 500 == 0) log(fmt::format("synth: {}/{} tiles", i + 1, o.samples));
  }
  write_manifest_file(root / config.data.manifest, records,
                      {fmt::format("synthetic context task: {} classes, seed {}", o.num_classes,
                                   o.seed)});
  nlohmann::json info = {{"kind", "synthetic"},
                         {"sampling", "centered"},
                         {"num_classes", o.num_classes},
                         {"bands", o.bands},
                         {"seed", o.seed},
                         {"marker_size", o.resolved_marker_size()},
                         {"samples", o.samples},
                         {"geometry", nlohmann::json(config.model).at("geometry")}};
  std::ofstream out(root / "dataset.json");
  if (!out) throw IoError(fmt::format("cannot write '{}'", (root / "dataset.json").string()));
  out << info.dump(2) << "\n";
  return o.samples;
}

TrainOutcome cmd_train(const ExperimentConfig& config,
                       const std::optional<fs::path>& resume_from, const LogSink& log) {
  config.validate();
  const auto sampling = resolve_sampling(config);
  auto train_tiles = load_split(config, SplitRole::kTrain);
  auto val_tiles = load_split(config, SplitRole::kVal);
  if (train_tiles.empty()) throw DataError("dataset has no training tiles");
  if (val_tiles.empty()) throw DataError("dataset has no validation tiles");
  for (const auto* set : {&train_tiles, &val_tiles}) {
    for (const auto& t : *set) t.validate(config.model.num_classes, config.train.ignore_index);
  }
  const auto stats = config.data.normalize ? BandStats::compute(train_tiles)
                                           : BandStats::identity(config.model.in_channels);

  TrainOutcome outcome;
  outcome.run_dir = config.resolved_output_dir();
  fs::create_directories(outcome.run_dir);
  save_config(outcome.run_dir / "config.json", config);

  torch::set_num_threads(static_cast<int>(config.workers));
  torch::manual_seed(config.seed);
  SegmentationModel model(config.model);

  TrainConfig tc = config.train;
  tc.seed = config.seed;
  tc.checkpoint_dir = outcome.run_dir;
  Trainer trainer(model, tc, stats);
  if (log) {
    trainer.on_log = [&](const nlohmann::json& rec) {
      if (rec.value("type", "") == "epoch") log(rec.dump());
    };
  }
  TileWindowDataset train(std::move(train_tiles), config.model.geometry, sampling);
  TileWindowDataset val(std::move(val_tiles), config.model.geometry, sampling);
  outcome.report = trainer.fit(train, val, resume_from);
  return outcome;
}

MetricsReport cmd_eval(const ExperimentConfig& config, const fs::path& checkpoint,
                       const std::string& split, const std::optional<fs::path>& report_path) {
  const auto role = parse_role(split);
  torch::set_num_threads(static_cast<int>(config.workers));
  auto loaded = load_model_checkpoint(checkpoint);
  const auto& mc = loaded.model->config();
  auto tiles = load_split(config, role);
  if (tiles.empty()) throw DataError(fmt::format("split '{}' has no tiles", split));
  for (const auto& t : tiles) t.validate(mc.num_classes, config.train.ignore_index);

  ConfusionMatrix cm(mc.num_classes);
  if (resolve_sampling(config) == WindowSampling::kCentered) {
    TileWindowDataset data(std::move(tiles), mc.geometry, WindowSampling::kCentered);
    cm = evaluate_windows(loaded.model, data, loaded.stats, config.train.eval_batch_size,
                          config.train.ignore_index);
  } else {
    auto predictor = make_predictor(loaded.model, loaded.stats);
    SlidingOptions so;
    so.stride = config.eval.stride;
    so.batch_size = config.eval.batch_size;
    for (const auto& t : tiles) {
      cm.accumulate(sliding_predict(predictor, t, mc.geometry, so).classes, t.labels,
                    config.train.ignore_index);
    }
  }
  auto report = compute_metrics(cm, config.eval.excluded_classes);
  if (report_path) {
    if (report_path->has_parent_path()) fs::create_directories(report_path->parent_path());
    std::ofstream out(*report_path);
    if (!out) throw IoError(fmt::format("cannot write '{}'", report_path->string()));
    auto j = report.to_json();
    j["split"] = split;
    j["checkpoint"] = checkpoint.string();
    j["confusion_matrix"] = cm.to_json();
    out << j.dump(2) << "\n";
  }
  return report;
}

torch::Tensor cmd_predict(const ExperimentConfig& config, const fs::path& checkpoint,
                          const fs::path& image, const fs::path& output) {
  torch::set_num_threads(static_cast<int>(config.workers));
  auto loaded = load_model_checkpoint(checkpoint);
  const auto& mc = loaded.model->config();
  RasterTile tile;
  tile.id = image.stem().string();
  tile.pixels = load_npy(image).to(torch::kFloat);
  if (tile.pixels.dim() == 2) tile.pixels = tile.pixels.unsqueeze(0);
  if (tile.pixels.dim() != 3 || tile.bands() != mc.in_channels) {
    throw DataError(fmt::format("image must be [{}, H, W], got {}", mc.in_channels,
                                c10::str(tile.pixels.sizes())));
  }
  tile.labels = torch::zeros({tile.height(), tile.width()}, torch::kLong);
  SlidingOptions so;
  so.stride = config.eval.stride;
  so.batch_size = config.eval.batch_size;
  auto pred = sliding_predict(make_predictor(loaded.model, loaded.stats), tile, mc.geometry, so);
  save_npy(output, pred.classes.to(torch::kInt));
  return pred.classes;
}

}  // namespace wiconet
