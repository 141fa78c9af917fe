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

#include <array>
#include <cstdint>
#include <vector>

#include <torch/torch.h>

namespace wiconet {

/// Encoder output. `values` is [B, C, H/stride, W/stride].
struct FeatureMap {
  torch::Tensor values;
  int64_t stride = 1;

  int64_t channels() const { return values.size(1); }
  int64_t height() const { return values.size(2); }
  int64_t width() const { return values.size(3); }
};

// Both encoders reduce resolution by exactly this factor.
inline constexpr int64_t kEncoderStride = 8;

/// Bottleneck residual network. Stages 3 and 4 trade their stride for
/// dilation 2 and 4, so the output stride is 8.
struct ResidualEncoderConfig {
  int64_t in_channels = 3;
  int64_t base_width = 64;
  std::array<int64_t, 4> stage_blocks{3, 4, 6, 3};

  static constexpr int64_t kExpansion = 4;
  int64_t stage_width(int stage) const { return base_width << stage; }
  int64_t out_channels() const { return stage_width(3) * kExpansion; }
  // Spatial strides of stem conv, stem pool and the four stages.
  static constexpr std::array<int64_t, 6> kStridePlan{2, 2, 1, 2, 1, 1};
  static constexpr std::array<int64_t, 4> kStageDilation{1, 1, 2, 4};
};

/// Eight 3x3 conv layers with three 2x2 max-pools after conv pairs 1-3.
/// Widths double at each pool: base, 2*base, 4*base, 8*base.
struct ContextEncoderConfig {
  int64_t in_channels = 3;
  int64_t base_width = 64;

  int64_t stage_width(int stage) const { return base_width << stage; }
  int64_t out_channels() const { return stage_width(3); }
  static constexpr std::array<int64_t, 4> kStridePlan{2, 2, 2, 1};
};

// conv -> batch norm -> relu
class ConvNormActImpl : public torch::nn::Module {
 public:
  ConvNormActImpl(int64_t in, int64_t out, int64_t kernel, int64_t stride, int64_t dilation,
                  bool bias, bool activation = true);
  torch::Tensor forward(const torch::Tensor& x);

  torch::nn::Conv2d conv{nullptr};
  torch::nn::BatchNorm2d norm{nullptr};

 private:
  bool activation_;
};
TORCH_MODULE(ConvNormAct);

class BottleneckImpl : public torch::nn::Module {
 public:
  BottleneckImpl(int64_t in, int64_t width, int64_t stride, int64_t dilation);
  torch::Tensor forward(const torch::Tensor& x);

  ConvNormAct reduce{nullptr};
  ConvNormAct spatial{nullptr};
  ConvNormAct expand{nullptr};
  ConvNormAct shortcut{nullptr};  // null when the identity fits
};
TORCH_MODULE(Bottleneck);

class ResidualEncoderImpl : public torch::nn::Module {
 public:
  explicit ResidualEncoderImpl(const ResidualEncoderConfig& config);

  // Input [B, c, h, w] with h, w divisible by 8.
  FeatureMap forward(const torch::Tensor& image);

  const ResidualEncoderConfig& config() const { return config_; }

  ConvNormAct stem{nullptr};
  torch::nn::MaxPool2d pool{nullptr};
  std::array<torch::nn::Sequential, 4> stages;

 private:
  ResidualEncoderConfig config_;
};
TORCH_MODULE(ResidualEncoder);

class ContextEncoderImpl : public torch::nn::Module {
 public:
  explicit ContextEncoderImpl(const ContextEncoderConfig& config);

  FeatureMap forward(const torch::Tensor& image);

  const ContextEncoderConfig& config() const { return config_; }

  // Conv layers in order; a pool follows layers 1, 3 and 5 (0-based).
  std::vector<ConvNormAct> convs;

 private:
  ContextEncoderConfig config_;
};
TORCH_MODULE(ContextEncoder);

// Throws GeometryError unless h and w are positive multiples of `stride`.
void check_divisible(const torch::Tensor& image, int64_t stride, const char* what);

int64_t count_parameters(const torch::nn::Module& module);

}  // namespace wiconet
