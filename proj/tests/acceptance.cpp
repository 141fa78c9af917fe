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

// Acceptance runner: one PASS/FAIL line per criterion, non-zero exit on any
// failure. Measurements come from checks.hpp; the context experiment and the
// optional dataset smoke run live here.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <thread>

#include <fmt/format.h>
#include <torch/torch.h>

#include "checks.hpp"
#include "wiconet/backbones.hpp"
#include "wiconet/config.hpp"
#include "wiconet/experiment.hpp"
#include "wiconet/model.hpp"
#include "wiconet/synth.hpp"
#include "wiconet/training.hpp"

namespace {

using namespace wiconet;
namespace fs = std::filesystem;

int failures = 0;

void verdict(bool ok, const std::string& name, const std::string& detail) {
  if (!ok) ++failures;
  std::printf("%s  %-22s %s\n", ok ? "PASS" : "FAIL", name.c_str(), detail.c_str());
  std::fflush(stdout);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ----------------------------------------------------------------------------

struct VariantRun {
  double final_oa = 0.0;
  double best_oa = 0.0;
  double seconds = 0.0;
};

VariantRun train_variant(Variant v, const PairDataset& train, const PairDataset& val,
                         int64_t epochs) {
  const auto t0 = std::chrono::steady_clock::now();
  torch::manual_seed(1);
  TrainConfig tc;
  tc.epochs = epochs;
  tc.batch_size = 32;
  tc.base_lr = 0.01;
  tc.seed = 3;
  Trainer trainer(SegmentationModel(ModelConfig::toy(v, 4, 64)), tc, BandStats::identity(3));
  trainer.on_log = [&](const nlohmann::json& r) {
    if (r.at("type") != "epoch") return;
    std::printf("      %-16s epoch %lld  loss %.4f  val_oa %.4f\n", variant_name(v).c_str(),
                static_cast<long long>(r.at("epoch").get<int64_t>()),
                r.at("train_loss").get<double>(), r.at("val_oa").get<double>());
    std::fflush(stdout);
  };
  auto report = trainer.fit(train, val);
  return {report.history.back().val_oa, report.best_oa, seconds_since(t0)};
}

void context_experiment() {
  const auto t0 = std::chrono::steady_clock::now();
  SynthOptions o;
  o.samples = 2400;
  o.num_classes = 4;
  o.geometry = WindowGeometry{64, 64, 3, 4};
  o.seed = 7;
  auto all = synth_dataset(o);
  PairDataset train({all.begin(), all.begin() + 2000});
  PairDataset val({all.begin() + 2000, all.end()});

  const auto wide = train_variant(Variant::kWideContext, train, val, 8);
  const auto self = train_variant(Variant::kLocalSelfAttn, train, val, 8);
  const auto local = train_variant(Variant::kLocalOnly, train, val, 8);
  const double total = seconds_since(t0);
  const bool ok = wide.final_oa >= 0.90 && local.final_oa <= 0.55 &&
                  wide.final_oa > self.final_oa && self.final_oa >= local.final_oa;
  verdict(ok, "context_dependency",
          fmt::format("val OA wide_context {:.4f} > local_self_attn {:.4f} >= local_only {:.4f} "
                      "(need wide >= 0.90, local <= 0.55); {:.0f}s wall on {} thread(s)",
                      wide.final_oa, self.final_oa, local.final_oa, total,
                      torch::get_num_threads()));
}

void attention_checks() {
  const double rows = checks::attention_row_sum_error(100);
  const double same = checks::cross_equals_self_error();
  const double oracle = checks::attention_oracle_error();
  verdict(rows <= 1e-6 && same <= 1e-6 && oracle <= 1e-8, "attention",
          fmt::format("row sums {:.2e} (<=1e-6, 100 seeds), cross==self {:.2e} (<=1e-6), "
                      "loop oracle {:.2e} (<=1e-8)",
                      rows, same, oracle));
}

void gradient_checks() {
  int64_t params = 0;
  const double loss = checks::dual_loss_gradient_error();
  const double block = checks::context_block_gradient_error();
  const double model = checks::model_gradient_error(&params);
  verdict(loss <= 1e-4 && block <= 1e-4 && model <= 1e-4 && params <= 5000, "gradients",
          fmt::format("relative FD error dual_loss {:.2e}, context_block {:.2e}, "
                      "model {:.2e} ({} params); limit 1e-4",
                      loss, block, model, params));
}

void schedule_checks() {
  const double err = checks::schedule_error(1000);
  const double a0 = alpha_schedule(0, 1000);
  const double lr0 = lr_schedule(0, 1000);
  verdict(err <= 1e-12 && a0 == 1.0 && lr0 == 0.1, "schedules",
          fmt::format("max closed-form error {:.2e} over 1000 steps; alpha(0) = {}, lr(0) = {}",
                      err, a0, lr0));
}

void geometry_checks() {
  torch::NoGradGuard no_grad;
  const auto config = ModelConfig::defaults();
  SegmentationModel model(config);
  model->eval();
  const auto& g = config.geometry;
  auto local = model->local_encoder(torch::zeros({1, 3, g.local_height, g.local_width}));
  auto context = model->context_encoder(
      torch::zeros({1, 3, g.context_input_height(), g.context_input_width()}));
  const auto lt = model->transformer->local_embedding(
      FeatureMap{model->local_reduce(local.values), local.stride});
  const auto ct = model->transformer->context_embedding(context);
  const bool ok = g.local_height == 256 && g.context_height() == 768 &&
                  g.context_input_height() == 192 && local.values.size(2) == 32 &&
                  local.values.size(3) == 32 && context.values.size(2) == 24 &&
                  context.values.size(3) == 24 && lt.count() == 1024 && ct.count() == 576;
  verdict(ok, "geometry",
          fmt::format("local {}->{}x{} (N={}), context {}->{}->{}x{} (M={})", g.local_height,
                      local.values.size(2), local.values.size(3), lt.count(),
                      g.context_height(), g.context_input_height(), context.values.size(2),
                      context.values.size(3), ct.count()));
}

void metrics_checks() {
  const double err = checks::metrics_oracle_error(1000);
  const double binary = checks::binary_identity_error(1000);
  verdict(err <= 1e-12 && binary <= 1e-12, "metrics",
          fmt::format("scalar oracle {:.2e} over 1000 matrices, F1 = 2IoU/(1+IoU) {:.2e}", err,
                      binary));
}

void parameter_count() {
  SegmentationModel model(ModelConfig::defaults());
  const auto n = count_parameters(*model);
  const double millions = static_cast<double>(n) / 1e6;
  verdict(millions >= 38.24 * 0.8 && millions <= 38.24 * 1.2, "parameter_count",
          fmt::format("default wide_context: {} parameters ({:.2f} M; target 38.24 M +-20%)", n,
                      millions));
}

void stitching_checks() {
  int64_t cases = 0;
  const auto bad = checks::reflect_mismatches(&cases);
  const double stitch = checks::stitching_error();
  verdict(bad == 0 && cases > 0 && stitch <= 1e-5, "reflection_stitching",
          fmt::format("reflect_pad {}/{} cases disagree; overlapped stitching error {:.2e}", bad,
                      cases, stitch));
}

void dataset_smoke() {
  const char* root = std::getenv("WICONET_DATASET_ROOT");
  if (root == nullptr || *root == '\0') {
    std::printf("SKIP  %-22s %s\n", "dataset_smoke", "WICONET_DATASET_ROOT not set");
    return;
  }
  try {
    ExperimentConfig c;
    c.name = "acceptance_smoke";
    c.data.root = root;
    c.output_dir = fs::temp_directory_path() / "wiconet_acceptance_smoke";
    int64_t classes = 6;
    if (const char* u = std::getenv("WICONET_DATASET_CLASSES")) classes = std::stoll(u);
    c.model = ModelConfig::toy(Variant::kWideContext, classes);
    c.train.epochs = 5;
    c.train.base_lr = 0.01;
    cmd_train(c);
    const auto report_path = c.output_dir / "eval_val.json";
    cmd_eval(c, c.output_dir / "best.ckpt", "val", report_path);
    std::ifstream in(report_path);
    const auto j = nlohmann::json::parse(in);
    const bool ok = j.contains("OA") && j.contains("mean_f1") && j.contains("miou") &&
                    j.contains("per_class") &&
                    j.at("per_class").size() == static_cast<size_t>(classes);
    verdict(ok, "dataset_smoke",
            fmt::format("5-epoch toy run on {}: OA {:.4f}, report {}", root,
                        j.value("OA", -1.0), report_path.string()));
  } catch (const std::exception& e) {
    verdict(false, "dataset_smoke", e.what());
  }
}

}  // namespace

int main() {
  torch::set_num_threads(static_cast<int>(std::max(1u, std::thread::hardware_concurrency())));
  attention_checks();
  gradient_checks();
  schedule_checks();
  geometry_checks();
  metrics_checks();
  parameter_count();
  stitching_checks();
  dataset_smoke();
  context_experiment();
  std::printf("%s: %d failing criteria\n", failures == 0 ? "ACCEPTED" : "REJECTED", failures);
  return failures == 0 ? 0 : 1;
}
