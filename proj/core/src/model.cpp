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

#include "wiconet/model.hpp"

#include <fmt/format.h>

#include "wiconet/errors.hpp"

namespace wiconet {

namespace F = torch::nn::functional;

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::kLocalOnly: return "local_only";
    case Variant::kLocalSelfAttn: return "local_self_attn";
    case Variant::kWideContext: return "wide_context";
  }
  return "wide_context";
}

Variant parse_variant(const std::string& name) {
  if (name == "local_only") return Variant::kLocalOnly;
  if (name == "local_self_attn") return Variant::kLocalSelfAttn;
  if (name == "wide_context") return Variant::kWideContext;
  throw ConfigError(fmt::format(
      "unknown variant '{}' (expected local_only, local_self_attn or wide_context)", name));
}

ModelConfig ModelConfig::defaults(Variant variant, int64_t num_classes) {
  ModelConfig c;
  c.variant = variant;
  c.num_classes = num_classes;
  return c;
}

ModelConfig ModelConfig::toy(Variant variant, int64_t num_classes, int64_t local_size) {
  ModelConfig c;
  c.variant = variant;
  c.num_classes = num_classes;
  c.geometry = {local_size, local_size, 3, 4};
  c.local_encoder.base_width = 4;
  c.context_encoder.base_width = 16;
  c.transformer.width = 32;
  c.transformer.blocks = 2;
  c.transformer.heads = 4;
  c.head_width = 16;
  return c;
}

void ModelConfig::validate() const {
  if (num_classes < 2) throw ConfigError("a segmentation model needs at least two classes");
  if (in_channels < 1) throw ConfigError("in_channels must be positive");
  if (head_width < 1) throw ConfigError("head_width must be positive");
  geometry.validate();
  transformer.validate();
  if (geometry.local_height % kEncoderStride != 0 || geometry.local_width % kEncoderStride != 0) {
    throw GeometryError(fmt::format("local window {}x{} is not divisible by the encoder stride",
                                    geometry.local_height, geometry.local_width));
  }
  if (variant == Variant::kWideContext &&
      (geometry.context_input_height() % kEncoderStride != 0 ||
       geometry.context_input_width() % kEncoderStride != 0)) {
    throw GeometryError(fmt::format("context input {}x{} is not divisible by the encoder stride",
                                    geometry.context_input_height(),
                                    geometry.context_input_width()));
  }
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = {
      {"variant", variant_name(c.variant)},
      {"num_classes", c.num_classes},
      {"in_channels", c.in_channels},
      {"geometry",
       {{"local_height", c.geometry.local_height},
        {"local_width", c.geometry.local_width},
        {"ratio", c.geometry.ratio},
        {"context_downsample", c.geometry.context_downsample}}},
      {"local_encoder",
       {{"base_width", c.local_encoder.base_width},
        {"stage_blocks", c.local_encoder.stage_blocks}}},
      {"context_encoder", {{"base_width", c.context_encoder.base_width}}},
      {"transformer",
       {{"blocks", c.transformer.blocks},
        {"heads", c.transformer.heads},
        {"patch", c.transformer.patch},
        {"width", c.transformer.width},
        {"mlp_ratio", c.transformer.mlp_ratio},
        {"dropout", c.transformer.dropout},
        {"context_self_attention", c.transformer.context_self_attention},
        {"position_init_std", c.transformer.position_init_std}}},
      {"head_width", c.head_width},
  };
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  ModelConfig d;
  c = d;
  if (j.contains("variant")) c.variant = parse_variant(j.at("variant").get<std::string>());
  c.num_classes = j.value("num_classes", d.num_classes);
  c.in_channels = j.value("in_channels", d.in_channels);
  if (j.contains("geometry")) {
    const auto& g = j.at("geometry");
    c.geometry.local_height = g.value("local_height", d.geometry.local_height);
    c.geometry.local_width = g.value("local_width", c.geometry.local_height);
    c.geometry.ratio = g.value("ratio", d.geometry.ratio);
    c.geometry.context_downsample = g.value("context_downsample", d.geometry.context_downsample);
  }
  if (j.contains("local_encoder")) {
    const auto& e = j.at("local_encoder");
    c.local_encoder.base_width = e.value("base_width", d.local_encoder.base_width);
    c.local_encoder.stage_blocks = e.value("stage_blocks", d.local_encoder.stage_blocks);
  }
  if (j.contains("context_encoder")) {
    c.context_encoder.base_width =
        j.at("context_encoder").value("base_width", d.context_encoder.base_width);
  }
  if (j.contains("transformer")) {
    const auto& t = j.at("transformer");
    c.transformer.blocks = t.value("blocks", d.transformer.blocks);
    c.transformer.heads = t.value("heads", d.transformer.heads);
    c.transformer.patch = t.value("patch", d.transformer.patch);
    c.transformer.width = t.value("width", d.transformer.width);
    c.transformer.mlp_ratio = t.value("mlp_ratio", d.transformer.mlp_ratio);
    c.transformer.dropout = t.value("dropout", d.transformer.dropout);
    c.transformer.context_self_attention =
        t.value("context_self_attention", d.transformer.context_self_attention);
    c.transformer.position_init_std = t.value("position_init_std", d.transformer.position_init_std);
  }
  c.head_width = j.value("head_width", d.head_width);
  c.local_encoder.in_channels = c.in_channels;
  c.context_encoder.in_channels = c.in_channels;
}

// ----------------------------------------------------------------------------

torch::Tensor upsample_bilinear(const torch::Tensor& x, int64_t out_height, int64_t out_width) {
  if (x.size(2) == out_height && x.size(3) == out_width) return x;
  return F::interpolate(x, F::InterpolateFuncOptions()
                               .size(std::vector<int64_t>{out_height, out_width})
                               .mode(torch::kBilinear)
                               .align_corners(false));
}

ClassifierHeadImpl::ClassifierHeadImpl(int64_t in_channels, int64_t hidden_width,
                                       int64_t num_classes) {
  hidden = register_module(
      "hidden", torch::nn::Conv2d(torch::nn::Conv2dOptions(in_channels, hidden_width, 3)
                                      .padding(1)));
  classify = register_module("classify",
                             torch::nn::Conv2d(torch::nn::Conv2dOptions(hidden_width,
                                                                        num_classes, 1)));
}

torch::Tensor ClassifierHeadImpl::forward(const torch::Tensor& features, int64_t out_height,
                                          int64_t out_width) {
  return upsample_bilinear(classify(torch::relu(hidden(features))), out_height, out_width);
}

// ----------------------------------------------------------------------------

SegmentationModelImpl::SegmentationModelImpl(const ModelConfig& config) : config_(config) {
  config_.local_encoder.in_channels = config_.in_channels;
  config_.context_encoder.in_channels = config_.in_channels;
  config_.validate();
  const auto& c = config_;
  const auto width = c.transformer.width;

  local_encoder = register_module("local_encoder", ResidualEncoder(c.local_encoder));
  local_reduce = register_module(
      "local_reduce",
      torch::nn::Conv2d(torch::nn::Conv2dOptions(c.local_encoder.out_channels(), width, 1)));
  switch (c.variant) {
    case Variant::kLocalOnly: break;
    case Variant::kLocalSelfAttn:
      transformer = register_module(
          "transformer", ContextTransformer(c.transformer, TransformerMode::kSelf, width,
                                            c.local_grid_height(), c.local_grid_width()));
      break;
    case Variant::kWideContext:
      context_encoder = register_module("context_encoder", ContextEncoder(c.context_encoder));
      transformer = register_module(
          "transformer",
          ContextTransformer(c.transformer, TransformerMode::kCross, width,
                             c.local_grid_height(), c.local_grid_width(),
                             c.context_encoder.out_channels(), c.context_grid_height(),
                             c.context_grid_width()));
      break;
  }
  local_head = register_module("local_head", ClassifierHead(width, c.head_width, c.num_classes));
  if (c.variant == Variant::kWideContext) {
    context_head =
        register_module("context_head", ClassifierHead(width, c.head_width, c.num_classes));
  }
}

SegmentationLogits SegmentationModelImpl::forward(const torch::Tensor& local_image,
                                                  const std::optional<torch::Tensor>& context_image) {
  const auto& g = config_.geometry;
  if (local_image.dim() != 4 || local_image.size(2) != g.local_height ||
      local_image.size(3) != g.local_width) {
    throw GeometryError(fmt::format("local input must be [B, c, {}, {}]", g.local_height,
                                    g.local_width));
  }
  FeatureMap local = local_encoder(local_image);
  local.values = local_reduce(local.values);

  SegmentationLogits out;
  switch (config_.variant) {
    case Variant::kLocalOnly: break;
    case Variant::kLocalSelfAttn: local = transformer->forward_self(local); break;
    case Variant::kWideContext: {
      if (!context_image || !context_image->defined()) {
        throw ContractViolation("wide_context forward needs a context image");
      }
      const auto& ci = *context_image;
      if (ci.dim() != 4 || ci.size(2) != g.context_input_height() ||
          ci.size(3) != g.context_input_width()) {
        throw GeometryError(fmt::format("context input must be [B, c, {}, {}]",
                                        g.context_input_height(), g.context_input_width()));
      }
      auto [l, c] = transformer(local, context_encoder(ci));
      local = l;
      out.context = context_head(c.values, ci.size(2), ci.size(3));
      break;
    }
  }
  out.local = local_head(local.values, g.local_height, g.local_width);
  return out;
}

}  // namespace wiconet
