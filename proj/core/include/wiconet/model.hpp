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
#include <optional>
#include <string>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include "wiconet/backbones.hpp"
#include "wiconet/context_transformer.hpp"
#include "wiconet/windowing.hpp"

namespace wiconet {

enum class Variant {
  kLocalOnly,      // FCN baseline: local encoder + head
  kLocalSelfAttn,  // FCN + transformer over local tokens only
  kWideContext,    // dual branch with cross-attention over the context window
};

std::string variant_name(Variant v);
Variant parse_variant(const std::string& name);

struct ModelConfig {
  Variant variant = Variant::kWideContext;
  int64_t num_classes = 6;
  int64_t in_channels = 3;
  WindowGeometry geometry;
  ResidualEncoderConfig local_encoder;
  ContextEncoderConfig context_encoder;
  TransformerConfig transformer;
  int64_t head_width = 128;

  // Full-width defaults.
  static ModelConfig defaults(Variant variant = Variant::kWideContext, int64_t num_classes = 6);
  // Width-reduced topology for CPU-scale experiments and tests.
  static ModelConfig toy(Variant variant, int64_t num_classes, int64_t local_size = 64);

  void validate() const;
  int64_t local_grid_height() const { return geometry.local_height / kEncoderStride; }
  int64_t local_grid_width() const { return geometry.local_width / kEncoderStride; }
  int64_t context_grid_height() const {
    return geometry.context_input_height() / kEncoderStride;
  }
  int64_t context_grid_width() const { return geometry.context_input_width() / kEncoderStride; }
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

/// 3x3 conv -> ReLU -> 1x1 conv to u classes -> bilinear upsample to the
/// branch input size.
class ClassifierHeadImpl : public torch::nn::Module {
 public:
  ClassifierHeadImpl(int64_t in_channels, int64_t hidden, int64_t num_classes);
  torch::Tensor forward(const torch::Tensor& features, int64_t out_height, int64_t out_width);

  torch::nn::Conv2d hidden{nullptr};
  torch::nn::Conv2d classify{nullptr};
};
TORCH_MODULE(ClassifierHead);

// Bilinear resize with half-pixel centres (align_corners = false).
torch::Tensor upsample_bilinear(const torch::Tensor& x, int64_t out_height, int64_t out_width);

struct SegmentationLogits {
  torch::Tensor local;                   // [B, u, h_l, w_l]
  std::optional<torch::Tensor> context;  // [B, u, h_c/s, w_c/s]; wide_context only
};

class SegmentationModelImpl : public torch::nn::Module {
 public:
  explicit SegmentationModelImpl(const ModelConfig& config);

  // `context_image` is required for kWideContext and ignored otherwise.
  SegmentationLogits forward(const torch::Tensor& local_image,
                             const std::optional<torch::Tensor>& context_image = std::nullopt);

  const ModelConfig& config() const { return config_; }
  bool uses_context() const { return config_.variant == Variant::kWideContext; }

  ResidualEncoder local_encoder{nullptr};
  // 1x1 reduction of the local encoder output to the token width.
  torch::nn::Conv2d local_reduce{nullptr};
  ContextEncoder context_encoder{nullptr};
  ContextTransformer transformer{nullptr};
  ClassifierHead local_head{nullptr};
  ClassifierHead context_head{nullptr};

 private:
  ModelConfig config_;
};
TORCH_MODULE(SegmentationModel);

}  // namespace wiconet
