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

#include "wiconet/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include <fmt/format.h>

#include "wiconet/checkpoint.hpp"
#include "wiconet/errors.hpp"
#include "wiconet/inference.hpp"

namespace wiconet {

namespace {

void check_schedule_args(int64_t iteration, int64_t total) {
  if (total <= 0) throw ContractViolation("schedule needs a positive iteration count");
  if (iteration < 0 || iteration > total) {
    throw ContractViolation(fmt::format("iteration {} outside [0, {}]", iteration, total));
  }
}

}  // namespace

double alpha_schedule(int64_t iteration, int64_t total) {
  check_schedule_args(iteration, total);
  const double remaining = 1.0 - static_cast<double>(iteration) / static_cast<double>(total);
  return remaining * remaining;
}

double lr_schedule(int64_t iteration, int64_t total, double base, double power) {
  check_schedule_args(iteration, total);
  const double remaining = 1.0 - static_cast<double>(iteration) / static_cast<double>(total);
  return base * std::pow(remaining, power);
}

// ----------------------------------------------------------------------------

torch::Tensor mean_cross_entropy(const torch::Tensor& logits, const torch::Tensor& labels,
                                 std::optional<int64_t> ignore_index) {
  if (logits.dim() != 4 || labels.dim() != 3 || logits.size(0) != labels.size(0) ||
      logits.size(2) != labels.size(1) || logits.size(3) != labels.size(2)) {
    throw ContractViolation(fmt::format("logits {} and labels {} are not shape-consistent",
                                        c10::str(logits.sizes()), c10::str(labels.sizes())));
  }
  const int64_t ignore = ignore_index.value_or(-100);
  if (labels.ne(ignore).sum().item<int64_t>() == 0) {
    throw ContractViolation("every pixel carries the ignore label; the mean loss is undefined");
  }
  return torch::nn::functional::cross_entropy(
      logits, labels,
      torch::nn::functional::CrossEntropyFuncOptions().ignore_index(ignore).reduction(
          torch::kMean));
}

LossTerms dual_loss(const torch::Tensor& local_logits, const torch::Tensor& local_labels,
                    const std::optional<torch::Tensor>& context_logits,
                    const std::optional<torch::Tensor>& context_labels, double alpha,
                    std::optional<int64_t> ignore_index) {
  if (alpha < 0.0) throw ContractViolation("alpha must be non-negative");
  LossTerms t;
  t.local = mean_cross_entropy(local_logits, local_labels, ignore_index);
  t.total = t.local;
  if (context_logits) {
    if (!context_labels) throw ContractViolation("context logits given without context labels");
    t.context = mean_cross_entropy(*context_logits, *context_labels, ignore_index);
    t.total = t.local + alpha * t.context;
  }
  return t;
}

// ----------------------------------------------------------------------------

std::string sampling_name(WindowSampling s) {
  return s == WindowSampling::kCentered ? "centered" : "grid";
}

WindowSampling parse_sampling(const std::string& name) {
  if (name == "centered") return WindowSampling::kCentered;
  if (name == "grid") return WindowSampling::kGrid;
  throw ConfigError(fmt::format("unknown window sampling '{}' (expected centered or grid)", name));
}

TileWindowDataset::TileWindowDataset(std::vector<RasterTile> tiles, WindowGeometry geometry,
                                     WindowSampling sampling)
    : tiles_(std::move(tiles)), geometry_(geometry) {
  geometry_.validate();
  for (size_t t = 0; t < tiles_.size(); ++t) {
    const auto& tile = tiles_[t];
    if (sampling == WindowSampling::kCentered) {
      if (tile.height() < geometry_.local_height || tile.width() < geometry_.local_width) {
        throw GeometryError(fmt::format("tile '{}' is smaller than the local window", tile.id));
      }
      index_.emplace_back(t, centered_origin(tile, geometry_));
      continue;
    }
    for (auto r : window_starts(tile.height(), geometry_.local_height, geometry_.local_height)) {
      for (auto c : window_starts(tile.width(), geometry_.local_width, geometry_.local_width)) {
        index_.emplace_back(t, PixelOrigin{r, c});
      }
    }
  }
}

WindowPair TileWindowDataset::get(int64_t index) const {
  const auto& [tile, origin] = index_.at(static_cast<size_t>(index));
  return extract_window_pair(tiles_[tile], origin, geometry_);
}

Batch collate(const std::vector<WindowPair>& pairs, const BandStats& stats) {
  std::vector<torch::Tensor> li, ci, ll, cl;
  for (const auto& p : pairs) {
    li.push_back(p.local_image);
    ci.push_back(p.context_image);
    ll.push_back(p.local_label);
    cl.push_back(p.context_label);
  }
  return {stats.apply(torch::stack(li)), stats.apply(torch::stack(ci)), torch::stack(ll),
          torch::stack(cl)};
}

// ----------------------------------------------------------------------------

SgdMomentum::SgdMomentum(std::vector<torch::Tensor> params, double momentum, double weight_decay)
    : params_(std::move(params)), momentum_(momentum), weight_decay_(weight_decay) {
  for (const auto& p : params_) buffers_.push_back(torch::zeros_like(p));
}

void SgdMomentum::zero_grad() {
  for (auto& p : params_) {
    if (p.mutable_grad().defined()) p.mutable_grad().zero_();
  }
}

void SgdMomentum::step(double lr) {
  torch::NoGradGuard no_grad;
  for (size_t i = 0; i < params_.size(); ++i) {
    auto& p = params_[i];
    if (!p.grad().defined()) continue;
    auto g = p.grad();
    if (weight_decay_ != 0.0) g = g + weight_decay_ * p;
    buffers_[i].mul_(momentum_).add_(g);
    p.add_(buffers_[i], -lr);
  }
}

std::map<std::string, torch::Tensor> SgdMomentum::state() const {
  std::map<std::string, torch::Tensor> out;
  for (size_t i = 0; i < buffers_.size(); ++i) {
    out.emplace(fmt::format("momentum/{:05d}", i), buffers_[i].clone());
  }
  return out;
}

void SgdMomentum::load_state(const std::map<std::string, torch::Tensor>& state) {
  for (size_t i = 0; i < buffers_.size(); ++i) {
    const auto it = state.find(fmt::format("momentum/{:05d}", i));
    if (it == state.end() || it->second.sizes() != buffers_[i].sizes()) {
      throw DataError(fmt::format("optimiser state is missing or mis-shaped for parameter {}", i));
    }
    buffers_[i].copy_(it->second);
  }
}

// ----------------------------------------------------------------------------

void TrainConfig::validate() const {
  if (epochs <= 0) throw ConfigError("epochs must be positive");
  if (batch_size <= 0 || eval_batch_size <= 0) throw ConfigError("batch sizes must be positive");
  if (base_lr <= 0.0 || lr_power <= 0.0) throw ConfigError("learning rate and power must be positive");
  if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("momentum must be in [0, 1)");
  if (weight_decay < 0.0) throw ConfigError("weight decay must be non-negative");
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"epochs", c.epochs},
       {"batch_size", c.batch_size},
       {"base_lr", c.base_lr},
       {"momentum", c.momentum},
       {"lr_power", c.lr_power},
       {"weight_decay", c.weight_decay},
       {"seed", c.seed},
       {"augment", c.augment},
       {"flip_probability", c.augment_options.flip_probability},
       {"random_crop", c.augment_options.random_crop},
       {"min_crop_scale", c.augment_options.min_crop_scale},
       {"ignore_index", c.ignore_index ? nlohmann::json(*c.ignore_index) : nlohmann::json()},
       {"eval_batch_size", c.eval_batch_size}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  TrainConfig d;
  c.epochs = j.value("epochs", d.epochs);
  c.batch_size = j.value("batch_size", d.batch_size);
  c.base_lr = j.value("base_lr", d.base_lr);
  c.momentum = j.value("momentum", d.momentum);
  c.lr_power = j.value("lr_power", d.lr_power);
  c.weight_decay = j.value("weight_decay", d.weight_decay);
  c.seed = j.value("seed", d.seed);
  c.augment = j.value("augment", d.augment);
  c.augment_options.flip_probability =
      j.value("flip_probability", d.augment_options.flip_probability);
  c.augment_options.random_crop = j.value("random_crop", d.augment_options.random_crop);
  c.augment_options.min_crop_scale = j.value("min_crop_scale", d.augment_options.min_crop_scale);
  if (j.contains("ignore_index") && !j.at("ignore_index").is_null()) {
    c.ignore_index = j.at("ignore_index").get<int64_t>();
  } else {
    c.ignore_index.reset();
  }
  c.eval_batch_size = j.value("eval_batch_size", d.eval_batch_size);
}

nlohmann::json TrainReport::to_json() const {
  nlohmann::json h = nlohmann::json::array();
  for (const auto& e : history) {
    h.push_back({{"epoch", e.epoch},
                 {"iteration", e.iteration},
                 {"train_loss", e.train_loss},
                 {"val_oa", e.val_oa},
                 {"val_miou", e.val_miou},
                 {"seconds", e.seconds}});
  }
  return {{"best_epoch", best_epoch},
          {"best_oa", best_oa},
          {"iterations", iterations},
          {"total_iterations", total_iterations},
          {"best_checkpoint", best_checkpoint.string()},
          {"history", h}};
}

ConfusionMatrix evaluate_windows(SegmentationModel& model, const WindowDataset& data,
                                 const BandStats& stats, int64_t batch_size,
                                 std::optional<int64_t> ignore_index) {
  torch::NoGradGuard no_grad;
  const bool was_training = model->is_training();
  model->eval();
  ConfusionMatrix cm(model->config().num_classes);
  for (int64_t start = 0; start < data.size(); start += batch_size) {
    std::vector<WindowPair> pairs;
    for (int64_t i = start; i < std::min(data.size(), start + batch_size); ++i) {
      pairs.push_back(data.get(i));
    }
    auto b = collate(pairs, stats);
    std::optional<torch::Tensor> ctx;
    if (model->uses_context()) ctx = b.context_image;
    auto logits = model->forward(b.local_image, ctx).local;
    cm.accumulate(argmax_lowest(logits.transpose(0, 1)), b.local_label, ignore_index);
  }
  model->train(was_training);
  return cm;
}

// ----------------------------------------------------------------------------

namespace {

uint64_t epoch_seed(uint64_t seed, int64_t epoch) {
  uint64_t z = seed + 0x9E3779B97F4A7C15ULL * static_cast<uint64_t>(epoch + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

nlohmann::json history_json(const std::vector<EpochRecord>& history) {
  TrainReport r;
  r.history = history;
  return r.to_json().at("history");
}

std::vector<EpochRecord> history_from_json(const nlohmann::json& j) {
  std::vector<EpochRecord> out;
  for (const auto& e : j) {
    out.push_back({e.at("epoch").get<int64_t>(), e.at("iteration").get<int64_t>(),
                   e.at("train_loss").get<double>(), e.at("val_oa").get<double>(),
                   e.at("val_miou").get<double>(), e.at("seconds").get<double>()});
  }
  return out;
}

}  // namespace

Trainer::Trainer(SegmentationModel model, TrainConfig config, BandStats stats)
    : model_(std::move(model)), config_(std::move(config)), stats_(std::move(stats)) {
  config_.validate();
}

TrainReport Trainer::fit(const WindowDataset& train, const WindowDataset& val,
                         const std::optional<std::filesystem::path>& resume_from) {
  if (train.size() == 0) throw ContractViolation("training set is empty");
  if (val.size() == 0) throw ContractViolation("validation set is empty");
  const int64_t steps_per_epoch = (train.size() + config_.batch_size - 1) / config_.batch_size;
  const int64_t total = config_.epochs * steps_per_epoch;

  std::vector<torch::Tensor> params;
  for (auto& p : model_->parameters()) {
    if (p.requires_grad()) params.push_back(p);
  }
  SgdMomentum optimizer(params, config_.momentum, config_.weight_decay);

  TrainReport report;
  report.total_iterations = total;
  int64_t iteration = 0;
  int64_t start_epoch = 0;
  if (resume_from) {
    auto loaded = load_model_checkpoint(*resume_from);
    load_module_state(*model_, module_state(*loaded.model));
    optimizer.load_state(loaded.extra);
    const auto& m = loaded.metadata;
    if (m.value("total_iterations", int64_t{-1}) != total) {
      throw ConfigError("resume checkpoint was written for a different iteration budget");
    }
    iteration = m.at("iteration").get<int64_t>();
    start_epoch = m.at("epoch").get<int64_t>() + 1;
    report.best_epoch = m.at("best_epoch").get<int64_t>();
    report.best_oa = m.at("best_oa").get<double>();
    report.history = history_from_json(m.at("history"));
  }

  const auto& dir = config_.checkpoint_dir;
  std::ofstream log_file;
  if (!dir.empty()) {
    std::filesystem::create_directories(dir);
    log_file.open(dir / "train_log.jsonl", resume_from ? std::ios::app : std::ios::trunc);
    if (!log_file) throw IoError(fmt::format("cannot write log in '{}'", dir.string()));
    report.best_checkpoint = dir / "best.ckpt";
  }
  auto emit = [&](const nlohmann::json& record) {
    if (log_file.is_open()) log_file << record.dump() << "\n";
    if (on_log) on_log(record);
  };

  for (int64_t epoch = start_epoch; epoch < config_.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(epoch_seed(config_.seed, epoch));
    torch::manual_seed(epoch_seed(config_.seed ^ 0xA5A5A5A5ULL, epoch));
    std::vector<int64_t> order(static_cast<size_t>(train.size()));
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);

    model_->train();
    double loss_sum = 0.0;
    int64_t loss_count = 0;
    for (int64_t start = 0; start < train.size(); start += config_.batch_size) {
      std::vector<WindowPair> pairs;
      for (int64_t i = start; i < std::min(train.size(), start + config_.batch_size); ++i) {
        auto pair = train.get(order[static_cast<size_t>(i)]);
        if (config_.augment) {
          pair = augment(pair, rng, config_.augment_options, model_->config().geometry.ratio);
        }
        pairs.push_back(std::move(pair));
      }
      auto batch = collate(pairs, stats_);
      const double lr = lr_schedule(iteration, total, config_.base_lr, config_.lr_power);
      const double alpha = alpha_schedule(iteration, total);

      std::optional<torch::Tensor> ctx;
      if (model_->uses_context()) ctx = batch.context_image;
      auto out = model_->forward(batch.local_image, ctx);
      std::optional<torch::Tensor> ctx_labels;
      if (out.context) ctx_labels = batch.context_label;
      auto loss = dual_loss(out.local, batch.local_label, out.context, ctx_labels, alpha,
                            config_.ignore_index);
      const double value = loss.total.item<double>();
      if (!std::isfinite(value)) {
        throw TrainingError(fmt::format(
            "non-finite loss {} at iteration {} (epoch {}, lr {}, alpha {}, local {})", value,
            iteration, epoch, lr, alpha, loss.local.item<double>()));
      }
      optimizer.zero_grad();
      loss.total.backward();
      optimizer.step(lr);

      nlohmann::json rec = {{"type", "iteration"}, {"epoch", epoch}, {"iteration", iteration},
                            {"lr", lr},            {"alpha", alpha}, {"loss", value},
                            {"loss_local", loss.local.item<double>()}};
      if (loss.context.defined()) rec["loss_context"] = loss.context.item<double>();
      emit(rec);
      loss_sum += value;
      ++loss_count;
      ++iteration;
    }

    auto cm = evaluate_windows(model_, val, stats_, config_.eval_batch_size, config_.ignore_index);
    const auto metrics = compute_metrics(cm);
    EpochRecord record;
    record.epoch = epoch;
    record.iteration = iteration;
    record.train_loss = loss_sum / static_cast<double>(std::max<int64_t>(1, loss_count));
    record.val_oa = metrics.overall_accuracy;
    record.val_miou = metrics.miou;
    record.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report.history.push_back(record);

    const bool improved = report.best_epoch < 0 || metrics.overall_accuracy > report.best_oa;
    if (improved) {
      report.best_epoch = epoch;
      report.best_oa = metrics.overall_accuracy;
    }
    if (!dir.empty()) {
      if (improved) {
        save_model_checkpoint(dir / "best.ckpt", model_, stats_,
                              {{"epoch", epoch}, {"iteration", iteration},
                               {"val_oa", metrics.overall_accuracy}});
      }
      save_model_checkpoint(dir / "last.ckpt", model_, stats_,
                            {{"epoch", epoch},
                             {"iteration", iteration},
                             {"total_iterations", total},
                             {"best_epoch", report.best_epoch},
                             {"best_oa", report.best_oa},
                             {"history", history_json(report.history)}},
                            optimizer.state());
    }
    emit({{"type", "epoch"},
          {"epoch", epoch},
          {"iteration", iteration},
          {"train_loss", record.train_loss},
          {"val_oa", record.val_oa},
          {"val_miou", record.val_miou},
          {"val_mean_f1", metrics.mean_f1},
          {"best_oa", report.best_oa},
          {"seconds", record.seconds}});
  }
  report.iterations = iteration;
  if (!dir.empty()) {
    std::ofstream out(dir / "report.json");
    out << report.to_json().dump(2) << "\n";
  }
  return report;
}

}  // namespace wiconet
