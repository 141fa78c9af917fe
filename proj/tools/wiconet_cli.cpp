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

// wiconet synth|train|eval|predict
//
// Exit status is 0 on success. Failures print exactly one line to stderr,
//   error category=<name> message=<text>
// and exit with the category's code (see exit_code below).

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "wiconet/config.hpp"
#include "wiconet/errors.hpp"
#include "wiconet/experiment.hpp"

namespace {

int exit_code(wiconet::ErrorCategory c) {
  using wiconet::ErrorCategory;
  switch (c) {
    case ErrorCategory::kConfig: return 2;
    case ErrorCategory::kGeometry: return 3;
    case ErrorCategory::kContract: return 4;
    case ErrorCategory::kData: return 5;
    case ErrorCategory::kIo: return 6;
    case ErrorCategory::kTraining: return 7;
  }
  return 1;
}

std::string one_line(std::string s) {
  for (auto& ch : s) {
    if (ch == '\n' || ch == '\r') ch = ' ';
  }
  return s;
}

int fail(std::string_view category, const std::string& message, int code) {
  std::cerr << "error category=" << category << " message=" << one_line(message) << std::endl;
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Wide-context segmentation: synthetic data, training, evaluation, prediction"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("-c,--config", config_path, "Experiment config (JSON)");
    cmd->add_option("-s,--set", overrides, "Override a config leaf: key.path=value")
        ->take_all();
  };

  auto* synth = app.add_subcommand("synth", "Write a synthetic context-dependency dataset");
  add_common(synth);

  auto* train = app.add_subcommand("train", "Train a model; writes the experiment directory");
  add_common(train);
  std::string resume;
  train->add_option("--resume", resume, "Resume from a last.ckpt written by an earlier run");

  auto* eval = app.add_subcommand("eval", "Score a checkpoint on a dataset split");
  add_common(eval);
  std::string checkpoint;
  std::string split = "test";
  std::string report;
  eval->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  eval->add_option("--split", split, "train, val or test");
  eval->add_option("--report", report, "Where to write the metrics JSON");

  auto* predict = app.add_subcommand("predict", "Predict a class raster for one image");
  add_common(predict);
  std::string image;
  std::string output;
  predict->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  predict->add_option("--image", image, "float32 [bands, H, W] .npy image")->required();
  predict->add_option("--output", output, "Output int32 [H, W] .npy raster")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", e.what(), 64);
  }

  try {
    const auto config = wiconet::load_config(config_path, overrides);
    auto log = [](const std::string& line) { std::cout << line << std::endl; };

    if (synth->parsed()) {
      const auto n = wiconet::cmd_synth(config, log);
      std::cout << "wrote " << n << " tiles to " << config.data.root.string() << std::endl;
    } else if (train->parsed()) {
      std::optional<std::filesystem::path> from;
      if (!resume.empty()) from = resume;
      const auto outcome = wiconet::cmd_train(config, from, log);
      std::cout << "best_epoch=" << outcome.report.best_epoch
                << " best_oa=" << outcome.report.best_oa
                << " run_dir=" << outcome.run_dir.string() << std::endl;
    } else if (eval->parsed()) {
      std::optional<std::filesystem::path> path;
      if (!report.empty()) path = report;
      const auto metrics = wiconet::cmd_eval(config, checkpoint, split, path);
      std::cout << metrics.to_json().dump(2) << std::endl;
    } else if (predict->parsed()) {
      const auto classes = wiconet::cmd_predict(config, checkpoint, image, output);
      std::cout << "wrote " << classes.size(0) << "x" << classes.size(1) << " prediction to "
                << output << std::endl;
    }
  } catch (const wiconet::Error& e) {
    return fail(wiconet::category_name(e.category()), e.what(), exit_code(e.category()));
  } catch (const std::exception& e) {
    return fail("internal", e.what(), 1);
  }
  return 0;
}
