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

#include "wiconet/backbones.hpp"

#include <fmt/format.h>

#include "wiconet/errors.hpp"

namespace wiconet {

namespace F = torch::nn::functional;

void check_divisible(const torch::Tensor& image, int64_t stride, const char* what) {
  if (image.dim() != 4) {
    throw GeometryError(fmt::format("{} expects [B, C, H, W], got {} dims", what, image.dim()));
  }
  const auto h = image.size(2);
  const auto w = image.size(3);
  if (h <= 0 || w <= 0 || h % stride != 0 || w % stride != 0) {
    throw GeometryError(
        fmt::format("{} input {}x{} is not divisible by stride {}", what, h, w, stride));
  }
}

int64_t count_parameters(const torch::nn::Module& module) {
  int64_t n = 0;
  for (const auto& p : module.parameters(true)) n += p.numel();
  return n;
}

ConvNormActImpl::ConvNormActImpl(int64_t in, int64_t out, int64_t kernel, int64_t stride,
                                 int64_t dilation, bool bias, bool activation)
    : activation_(activation) {
  const int64_t padding = dilation * (kernel - 1) / 2;
  conv = register_module("conv", torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, kernel)
                                                       .stride(stride)
                                                       .padding(padding)
                                                       .dilation(dilation)
                                                       .bias(bias)));
  norm = register_module("norm", torch::nn::BatchNorm2d(out));
}

torch::Tensor ConvNormActImpl::forward(const torch::Tensor& x) {
  auto y = norm(conv(x));
  return activation_ ? torch::relu(y) : y;
}

BottleneckImpl::BottleneckImpl(int64_t in, int64_t width, int64_t stride, int64_t dilation) {
  const int64_t out = width * ResidualEncoderConfig::kExpansion;
  reduce = register_module("reduce", ConvNormAct(in, width, 1, 1, 1, false));
  spatial = register_module("spatial", ConvNormAct(width, width, 3, stride, dilation, false));
  expand = register_module("expand", ConvNormAct(width, out, 1, 1, 1, false, false));
  if (stride != 1 || in != out) {
    shortcut = register_module("shortcut", ConvNormAct(in, out, 1, stride, 1, false, false));
  }
}

torch::Tensor BottleneckImpl::forward(const torch::Tensor& x) {
  auto y = expand(spatial(reduce(x)));
  auto identity = shortcut ? shortcut(x) : x;
  return torch::relu(y + identity);
}

ResidualEncoderImpl::ResidualEncoderImpl(const ResidualEncoderConfig& config) : config_(config) {
  if (config.in_channels <= 0 || config.base_width <= 0) {
    throw ConfigError("residual encoder widths must be positive");
  }
  stem = register_module("stem", ConvNormAct(config.in_channels, config.base_width, 7, 2, 1,
                                             false));
  pool = register_module("pool",
                         torch::nn::MaxPool2d(torch::nn::MaxPool2dOptions(3).stride(2).padding(1)));
  int64_t in = config.base_width;
  int64_t dilation = 1;
  for (int s = 0; s < 4; ++s) {
    if (config.stage_blocks[s] <= 0) throw ConfigError("every stage needs at least one block");
    const int64_t width = config.stage_width(s);
    const int64_t stride = ResidualEncoderConfig::kStridePlan[s + 2];
    // The first block of a dilated stage keeps the previous dilation.
    const int64_t first_dilation = dilation;
    dilation = ResidualEncoderConfig::kStageDilation[s];
    torch::nn::Sequential stage;
    for (int64_t b = 0; b < config.stage_blocks[s]; ++b) {
      stage->push_back(Bottleneck(in, width, b == 0 ? stride : 1, b == 0 ? first_dilation
                                                                          : dilation));
      in = width * ResidualEncoderConfig::kExpansion;
    }
    stages[s] = register_module(fmt::format("stage{}", s + 1), stage);
  }
  for (auto& m : modules(false)) {
    if (auto* conv = m->as<torch::nn::Conv2d>()) {
      torch::nn::init::kaiming_normal_(conv->weight, 0.0, torch::kFanOut, torch::kReLU);
    }
  }
}

FeatureMap ResidualEncoderImpl::forward(const torch::Tensor& image) {
  check_divisible(image, kEncoderStride, "local encoder");
  auto x = pool(stem(image));
  for (auto& stage : stages) x = stage->forward(x);
  return {x, kEncoderStride};
}

ContextEncoderImpl::ContextEncoderImpl(const ContextEncoderConfig& config) : config_(config) {
  if (config.in_channels <= 0 || config.base_width <= 0) {
    throw ConfigError("context encoder widths must be positive");
  }
  int64_t in = config.in_channels;
  for (int s = 0; s < 4; ++s) {
    const int64_t width = config.stage_width(s);
    for (int k = 0; k < 2; ++k) {
      convs.push_back(register_module(fmt::format("conv{}", convs.size() + 1),
                                      ConvNormAct(in, width, 3, 1, 1, true)));
      in = width;
    }
  }
}

FeatureMap ContextEncoderImpl::forward(const torch::Tensor& image) {
  check_divisible(image, kEncoderStride, "context encoder");
  auto x = image;
  for (size_t i = 0; i < convs.size(); ++i) {
    x = convs[i](x);
    if (i % 2 == 1 && i < 6) x = F::max_pool2d(x, F::MaxPool2dFuncOptions(2).stride(2));
  }
  return {x, kEncoderStride};
}

}  // namespace wiconet
