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
#include <utility>
#include <vector>

#include <torch/torch.h>

#include "wiconet/backbones.hpp"

namespace wiconet {

struct TransformerConfig {
  int64_t blocks = 4;  // L
  int64_t heads = 4;   // n
  int64_t patch = 1;   // p
  int64_t width = 512; // D
  int64_t mlp_ratio = 4;
  double dropout = 0.0;
  // Also refine the context tokens with their own self-attention per block.
  bool context_self_attention = false;
  double position_init_std = 0.02;

  // Throws ConfigError when width is not divisible by heads or a size is < 1.
  void validate() const;
};

/// Embedded tokens, [B, count, D], laid out row-major over a
/// (grid_height, grid_width) patch grid.
struct TokenSequence {
  torch::Tensor tokens;
  int64_t grid_height = 0;
  int64_t grid_width = 0;

  int64_t count() const { return tokens.size(1); }
  int64_t width() const { return tokens.size(2); }
};

// Row-major flatten of p x p patches: [B, C, H, W] -> [B, H*W/p^2, C*p^2].
// Patch features are ordered (channel, dy, dx).
torch::Tensor flatten_patches(const torch::Tensor& features, int64_t patch);

// Inverse layout for p = 1 style token maps: [B, N, D] -> [B, D, gh, gw].
torch::Tensor tokens_to_map(const TokenSequence& tokens);

/// Linear projection of flattened p x p patches plus a learned positional
/// table of shape [count, D].
class PatchEmbeddingImpl : public torch::nn::Module {
 public:
  PatchEmbeddingImpl(int64_t in_channels, int64_t patch, int64_t width, int64_t grid_height,
                     int64_t grid_width, double position_init_std);

  TokenSequence forward(const FeatureMap& features);

  int64_t patch() const { return patch_; }

  torch::nn::Linear projection{nullptr};
  torch::Tensor position;

 private:
  int64_t patch_;
  int64_t grid_height_;
  int64_t grid_width_;
};
TORCH_MODULE(PatchEmbedding);

/// Multi-head scaled dot-product attention. Queries come from one token set,
/// keys and values from another; per-head q, k, v projections are D -> D/n
/// (stored stacked as D -> D, no bias), heads are concatenated and passed
/// through a learned D x D output projection.
class MultiHeadAttentionImpl : public torch::nn::Module {
 public:
  MultiHeadAttentionImpl(int64_t width, int64_t heads, double dropout = 0.0);

  torch::Tensor forward(const torch::Tensor& query_tokens, const torch::Tensor& kv_tokens);

  // Row-stochastic attention matrices [B, n, N, M]. `query_scale` multiplies
  // the projected queries before the logits are formed.
  torch::Tensor attention(const torch::Tensor& query_tokens, const torch::Tensor& kv_tokens,
                          double query_scale = 1.0);

  // Output together with the attention matrices that produced it.
  std::pair<torch::Tensor, torch::Tensor> forward_with_attention(
      const torch::Tensor& query_tokens, const torch::Tensor& kv_tokens);

  int64_t heads() const { return heads_; }
  int64_t head_width() const { return head_width_; }

  torch::nn::Linear query{nullptr};
  torch::nn::Linear key{nullptr};
  torch::nn::Linear value{nullptr};
  torch::nn::Linear output{nullptr};
  torch::nn::Dropout dropout{nullptr};

 private:
  torch::Tensor split_heads(const torch::Tensor& x) const;
  int64_t heads_;
  int64_t head_width_;
};
TORCH_MODULE(MultiHeadAttention);

// Self-attention: queries, keys and values all from `tokens`.
torch::Tensor msa(MultiHeadAttention& attention, const torch::Tensor& tokens);

// Local queries over context keys/values. Throws ContractViolation for an
// empty context or mismatched widths.
torch::Tensor cross_attention(MultiHeadAttention& attention, const torch::Tensor& local_tokens,
                              const torch::Tensor& context_tokens);

class MlpImpl : public torch::nn::Module {
 public:
  MlpImpl(int64_t width, int64_t hidden, double dropout);
  torch::Tensor forward(const torch::Tensor& x);

  torch::nn::Linear fc1{nullptr};
  torch::nn::Linear fc2{nullptr};
  torch::nn::Dropout dropout{nullptr};
};
TORCH_MODULE(Mlp);

/// One block:
///   t_l <- t_l + CrossAttn(LN(t_l), LN(t_c))
///   t_l <- t_l + MLP(LN(t_l))
/// t_c passes through unchanged unless context self-attention is enabled.
class ContextBlockImpl : public torch::nn::Module {
 public:
  explicit ContextBlockImpl(const TransformerConfig& config);

  std::pair<torch::Tensor, torch::Tensor> forward(const torch::Tensor& local_tokens,
                                                  const torch::Tensor& context_tokens);

  torch::nn::LayerNorm norm_local{nullptr};
  torch::nn::LayerNorm norm_context{nullptr};
  MultiHeadAttention attention{nullptr};
  torch::nn::LayerNorm norm_mlp{nullptr};
  Mlp mlp{nullptr};

  // Present only with context_self_attention.
  torch::nn::LayerNorm context_norm_attn{nullptr};
  MultiHeadAttention context_attention{nullptr};
  torch::nn::LayerNorm context_norm_mlp{nullptr};
  Mlp context_mlp{nullptr};
};
TORCH_MODULE(ContextBlock);

enum class TransformerMode {
  kCross,  // local queries attend over context tokens
  kSelf,   // local tokens attend over themselves (no context branch)
};

/// Embeds local and context feature maps, runs the blocks and reshapes both
/// token sets back to feature maps. The returned context map holds the
/// embedded tokens entering the first block (or the refined tokens when
/// context self-attention is on).
class ContextTransformerImpl : public torch::nn::Module {
 public:
  // Grid sizes are the encoder output extents; they fix the positional tables.
  ContextTransformerImpl(const TransformerConfig& config, TransformerMode mode,
                         int64_t local_channels, int64_t local_grid_h, int64_t local_grid_w,
                         int64_t context_channels = 0, int64_t context_grid_h = 0,
                         int64_t context_grid_w = 0);

  std::pair<FeatureMap, FeatureMap> forward(const FeatureMap& local, const FeatureMap& context);
  FeatureMap forward_self(const FeatureMap& local);

  const TransformerConfig& config() const { return config_; }
  TransformerMode mode() const { return mode_; }

  PatchEmbedding local_embedding{nullptr};
  PatchEmbedding context_embedding{nullptr};
  std::vector<ContextBlock> blocks;

 private:
  TransformerConfig config_;
  TransformerMode mode_;
};
TORCH_MODULE(ContextTransformer);

}  // namespace wiconet
