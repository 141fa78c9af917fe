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

#include "wiconet/context_transformer.hpp"

#include <cmath>

#include <fmt/format.h>

#include "wiconet/errors.hpp"

namespace wiconet {

void TransformerConfig::validate() const {
  if (blocks < 0 || heads < 1 || patch < 1 || width < 1 || mlp_ratio < 1) {
    throw ConfigError("transformer sizes must be positive (blocks may be zero)");
  }
  if (width % heads != 0) {
    throw ConfigError(fmt::format("token width {} is not divisible by {} heads", width, heads));
  }
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must be in [0, 1)");
}

torch::Tensor flatten_patches(const torch::Tensor& features, int64_t p) {
  check_divisible(features, p, "patch embedding");
  const auto b = features.size(0);
  const auto c = features.size(1);
  const auto gh = features.size(2) / p;
  const auto gw = features.size(3) / p;
  // [B, C, gh, p, gw, p] -> [B, gh, gw, C, p, p]
  return features.view({b, c, gh, p, gw, p})
      .permute({0, 2, 4, 1, 3, 5})
      .reshape({b, gh * gw, c * p * p});
}

torch::Tensor tokens_to_map(const TokenSequence& t) {
  const auto b = t.tokens.size(0);
  return t.tokens.transpose(1, 2).reshape({b, t.width(), t.grid_height, t.grid_width});
}

// ----------------------------------------------------------------------------

PatchEmbeddingImpl::PatchEmbeddingImpl(int64_t in_channels, int64_t patch, int64_t width,
                                       int64_t grid_height, int64_t grid_width,
                                       double position_init_std)
    : patch_(patch), grid_height_(grid_height), grid_width_(grid_width) {
  projection = register_module("projection",
                               torch::nn::Linear(in_channels * patch * patch, width));
  position = register_parameter("position",
                                torch::randn({grid_height * grid_width, width}) *
                                    position_init_std);
}

TokenSequence PatchEmbeddingImpl::forward(const FeatureMap& features) {
  const auto& x = features.values;
  check_divisible(x, patch_, "patch embedding");
  const auto gh = x.size(2) / patch_;
  const auto gw = x.size(3) / patch_;
  if (gh != grid_height_ || gw != grid_width_) {
    throw GeometryError(fmt::format("patch grid {}x{} does not match the positional table {}x{}",
                                    gh, gw, grid_height_, grid_width_));
  }
  auto tokens = projection(flatten_patches(x, patch_)) + position.unsqueeze(0);
  return {tokens, gh, gw};
}

// ----------------------------------------------------------------------------

MultiHeadAttentionImpl::MultiHeadAttentionImpl(int64_t width, int64_t heads, double p)
    : heads_(heads), head_width_(width / heads) {
  if (heads < 1 || width % heads != 0) {
    throw ConfigError(fmt::format("width {} is not divisible by {} heads", width, heads));
  }
  query = register_module("query", torch::nn::Linear(torch::nn::LinearOptions(width, width)
                                                         .bias(false)));
  key = register_module("key", torch::nn::Linear(torch::nn::LinearOptions(width, width)
                                                     .bias(false)));
  value = register_module("value", torch::nn::Linear(torch::nn::LinearOptions(width, width)
                                                         .bias(false)));
  output = register_module("output", torch::nn::Linear(width, width));
  dropout = register_module("dropout", torch::nn::Dropout(p));
}

torch::Tensor MultiHeadAttentionImpl::split_heads(const torch::Tensor& x) const {
  // [B, T, D] -> [B, n, T, D/n]
  return x.view({x.size(0), x.size(1), heads_, head_width_}).transpose(1, 2);
}

torch::Tensor MultiHeadAttentionImpl::attention(const torch::Tensor& q_in,
                                                const torch::Tensor& kv_in, double query_scale) {
  auto q = split_heads(query(q_in));
  if (query_scale != 1.0) q = q * query_scale;
  auto k = split_heads(key(kv_in));
  auto logits = torch::matmul(q, k.transpose(-2, -1)) /
                std::sqrt(static_cast<double>(head_width_));
  return torch::softmax(logits, -1);
}

std::pair<torch::Tensor, torch::Tensor> MultiHeadAttentionImpl::forward_with_attention(
    const torch::Tensor& q_in, const torch::Tensor& kv_in) {
  auto a = attention(q_in, kv_in);
  auto v = split_heads(value(kv_in));
  auto heads = torch::matmul(dropout(a), v);  // [B, n, N, D/n]
  auto merged = heads.transpose(1, 2).reshape({q_in.size(0), q_in.size(1), -1});
  return {output(merged), a};
}

torch::Tensor MultiHeadAttentionImpl::forward(const torch::Tensor& q_in,
                                              const torch::Tensor& kv_in) {
  return forward_with_attention(q_in, kv_in).first;
}

torch::Tensor msa(MultiHeadAttention& attention, const torch::Tensor& tokens) {
  return attention(tokens, tokens);
}

torch::Tensor cross_attention(MultiHeadAttention& attention, const torch::Tensor& local_tokens,
                              const torch::Tensor& context_tokens) {
  if (context_tokens.dim() != 3 || context_tokens.size(1) == 0) {
    throw ContractViolation("cross-attention needs a non-empty context sequence");
  }
  if (local_tokens.size(-1) != context_tokens.size(-1)) {
    throw ContractViolation(fmt::format("local width {} differs from context width {}",
                                        local_tokens.size(-1), context_tokens.size(-1)));
  }
  return attention(local_tokens, context_tokens);
}

// ----------------------------------------------------------------------------

MlpImpl::MlpImpl(int64_t width, int64_t hidden, double p) {
  fc1 = register_module("fc1", torch::nn::Linear(width, hidden));
  fc2 = register_module("fc2", torch::nn::Linear(hidden, width));
  dropout = register_module("dropout", torch::nn::Dropout(p));
}

torch::Tensor MlpImpl::forward(const torch::Tensor& x) {
  return dropout(fc2(dropout(torch::gelu(fc1(x)))));
}

ContextBlockImpl::ContextBlockImpl(const TransformerConfig& c) {
  c.validate();
  auto ln = [&] { return torch::nn::LayerNorm(torch::nn::LayerNormOptions({c.width})); };
  norm_local = register_module("norm_local", ln());
  norm_context = register_module("norm_context", ln());
  attention = register_module("attention", MultiHeadAttention(c.width, c.heads, c.dropout));
  norm_mlp = register_module("norm_mlp", ln());
  mlp = register_module("mlp", Mlp(c.width, c.width * c.mlp_ratio, c.dropout));
  if (c.context_self_attention) {
    context_norm_attn = register_module("context_norm_attn", ln());
    context_attention =
        register_module("context_attention", MultiHeadAttention(c.width, c.heads, c.dropout));
    context_norm_mlp = register_module("context_norm_mlp", ln());
    context_mlp = register_module("context_mlp", Mlp(c.width, c.width * c.mlp_ratio, c.dropout));
  }
}

std::pair<torch::Tensor, torch::Tensor> ContextBlockImpl::forward(const torch::Tensor& t_l,
                                                                  const torch::Tensor& t_c) {
  auto local = t_l + cross_attention(attention, norm_local(t_l), norm_context(t_c));
  local = local + mlp(norm_mlp(local));
  if (!context_attention) return {local, t_c};
  auto ctx = t_c + msa(context_attention, context_norm_attn(t_c));
  ctx = ctx + context_mlp(context_norm_mlp(ctx));
  return {local, ctx};
}

// ----------------------------------------------------------------------------

ContextTransformerImpl::ContextTransformerImpl(const TransformerConfig& config,
                                               TransformerMode mode, int64_t local_channels,
                                               int64_t local_grid_h, int64_t local_grid_w,
                                               int64_t context_channels, int64_t context_grid_h,
                                               int64_t context_grid_w)
    : config_(config), mode_(mode) {
  config.validate();
  const auto p = config.patch;
  if (local_grid_h % p != 0 || local_grid_w % p != 0) {
    throw GeometryError(fmt::format("local features {}x{} not divisible by patch {}",
                                    local_grid_h, local_grid_w, p));
  }
  local_embedding = register_module(
      "local_embedding", PatchEmbedding(local_channels, p, config.width, local_grid_h / p,
                                        local_grid_w / p, config.position_init_std));
  if (mode == TransformerMode::kCross) {
    if (context_grid_h % p != 0 || context_grid_w % p != 0) {
      throw GeometryError(fmt::format("context features {}x{} not divisible by patch {}",
                                      context_grid_h, context_grid_w, p));
    }
    context_embedding = register_module(
        "context_embedding", PatchEmbedding(context_channels, p, config.width,
                                            context_grid_h / p, context_grid_w / p,
                                            config.position_init_std));
  }
  auto block_config = config;
  if (mode == TransformerMode::kSelf) block_config.context_self_attention = false;
  for (int64_t i = 0; i < config.blocks; ++i) {
    blocks.push_back(register_module(fmt::format("block{}", i), ContextBlock(block_config)));
  }
}

std::pair<FeatureMap, FeatureMap> ContextTransformerImpl::forward(const FeatureMap& local,
                                                                  const FeatureMap& context) {
  if (mode_ != TransformerMode::kCross) {
    throw ContractViolation("self-attention transformer has no context branch");
  }
  auto t_l = local_embedding(local);
  auto t_c = context_embedding(context);
  auto tokens_l = t_l.tokens;
  auto tokens_c = t_c.tokens;
  for (auto& block : blocks) std::tie(tokens_l, tokens_c) = block(tokens_l, tokens_c);
  const auto p = config_.patch;
  FeatureMap out_l{tokens_to_map({tokens_l, t_l.grid_height, t_l.grid_width}), local.stride * p};
  FeatureMap out_c{tokens_to_map({tokens_c, t_c.grid_height, t_c.grid_width}),
                   context.stride * p};
  return {out_l, out_c};
}

FeatureMap ContextTransformerImpl::forward_self(const FeatureMap& local) {
  auto t = local_embedding(local);
  auto tokens = t.tokens;
  for (auto& block : blocks) tokens = block(tokens, tokens).first;
  return {tokens_to_map({tokens, t.grid_height, t.grid_width}), local.stride * config_.patch};
}

}  // namespace wiconet
