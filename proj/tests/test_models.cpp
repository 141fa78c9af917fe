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

#include <gtest/gtest.h>

#include "checks.hpp"
#include "oracles.hpp"
#include "wiconet/backbones.hpp"
#include "wiconet/context_transformer.hpp"
#include "wiconet/errors.hpp"
#include "wiconet/model.hpp"
#include "wiconet/training.hpp"

namespace wiconet {
namespace {

using torch::indexing::Slice;
const auto kDouble = torch::TensorOptions().dtype(torch::kDouble);

// ----------------------------------------------------------------------------
// Encoders

TEST(ResidualEncoder, DefaultOutputShape) {
  torch::NoGradGuard no_grad;
  ResidualEncoder enc(ResidualEncoderConfig{});
  enc->eval();
  auto f = enc(torch::randn({1, 3, 256, 256}));
  EXPECT_EQ(f.values.sizes(), torch::IntArrayRef({1, 2048, 32, 32}));
  EXPECT_EQ(f.stride, 8);
}

TEST(ResidualEncoder, SmallInputAndDivisibility) {
  torch::NoGradGuard no_grad;
  ResidualEncoderConfig c;
  c.base_width = 4;
  ResidualEncoder enc(c);
  EXPECT_EQ(enc(torch::randn({2, 3, 64, 64})).values.sizes(),
            torch::IntArrayRef({2, 128, 8, 8}));
  EXPECT_THROW(enc(torch::randn({1, 3, 60, 64})), GeometryError);
}

TEST(ContextEncoder, DefaultOutputShape) {
  torch::NoGradGuard no_grad;
  ContextEncoder enc(ContextEncoderConfig{});
  auto f = enc(torch::randn({1, 3, 192, 192}));
  EXPECT_EQ(f.values.sizes(), torch::IntArrayRef({1, 512, 24, 24}));
}

TEST(ContextEncoder, ClosedFormParameterCount) {
  for (int64_t b : {1, 4, 64}) {
    ContextEncoderConfig c;
    c.base_width = b;
    const std::vector<int64_t> widths{b, b, 2 * b, 2 * b, 4 * b, 4 * b, 8 * b, 8 * b};
    int64_t expected = 0;
    int64_t in = 3;
    for (auto w : widths) {
      expected += in * w * 9 + w + 2 * w;  // conv weight + bias + norm affine
      in = w;
    }
    EXPECT_EQ(count_parameters(*ContextEncoder(c)), expected) << "base " << b;
  }
}

TEST(ConvNormAct, MatchesLoopConvolutionInEval) {
  torch::manual_seed(3);
  ConvNormAct layer(2, 3, 3, 1, 2, true);
  layer->to(torch::kDouble);
  {
    torch::NoGradGuard no_grad;
    layer->norm->running_mean.uniform_(-0.5, 0.5);
    layer->norm->running_var.uniform_(0.5, 2.0);
    layer->norm->weight.uniform_(0.5, 1.5);
    layer->norm->bias.uniform_(-0.5, 0.5);
  }
  layer->eval();
  auto x = torch::randn({1, 2, 7, 6}, kDouble);
  torch::NoGradGuard no_grad;
  auto got = layer(x);
  auto w = layer->conv->weight;
  auto b = layer->conv->bias;
  const auto& bn = layer->norm;
  for (int64_t o = 0; o < 3; ++o) {
    const double scale = bn->weight[o].item<double>() /
                         std::sqrt(bn->running_var[o].item<double>() + bn->options.eps());
    for (int64_t r = 0; r < 7; ++r) {
      for (int64_t c = 0; c < 6; ++c) {
        double s = b[o].item<double>();
        for (int64_t i = 0; i < 2; ++i) {
          for (int64_t dy = 0; dy < 3; ++dy) {
            for (int64_t dx = 0; dx < 3; ++dx) {
              const int64_t rr = r + (dy - 1) * 2;
              const int64_t cc = c + (dx - 1) * 2;
              if (rr < 0 || rr >= 7 || cc < 0 || cc >= 6) continue;
              s += w[o][i][dy][dx].item<double>() * x[0][i][rr][cc].item<double>();
            }
          }
        }
        const double y = std::max(
            0.0, (s - bn->running_mean[o].item<double>()) * scale + bn->bias[o].item<double>());
        ASSERT_NEAR(got[0][o][r][c].item<double>(), y, 1e-12);
      }
    }
  }
}

TEST(ContextEncoder, TranslationCovariantInInterior) {
  torch::manual_seed(4);
  ContextEncoderConfig c;
  c.base_width = 2;
  ContextEncoder enc(c);
  enc->eval();
  torch::NoGradGuard no_grad;
  auto x = torch::randn({1, 3, 256, 256});
  auto shifted = torch::roll(x, {16}, {3});
  auto a = enc(x).values;
  auto b = enc(shifted).values;
  // Two output cells of shift; compare away from both borders.
  auto lhs = b.index({Slice(), Slice(), Slice(8, 24), Slice(12, 24)});
  auto rhs = a.index({Slice(), Slice(), Slice(8, 24), Slice(10, 22)});
  EXPECT_LE((lhs - rhs).abs().max().item<double>(), 1e-4);
}

TEST(Encoders, EveryParameterReceivesGradient) {
  torch::manual_seed(5);
  SegmentationModel model(ModelConfig::toy(Variant::kWideContext, 4, 64));
  auto out = model->forward(torch::randn({2, 3, 64, 64}), torch::randn({2, 3, 48, 48}));
  auto labels = torch::randint(0, 4, {2, 64, 64}, torch::kLong);
  auto ctx_labels = torch::randint(0, 4, {2, 48, 48}, torch::kLong);
  dual_loss(out.local, labels, out.context, ctx_labels, 0.5).total.backward();
  for (const auto& item : model->named_parameters()) {
    ASSERT_TRUE(item.value().grad().defined()) << item.key();
    EXPECT_GT(item.value().grad().abs().sum().item<double>(), 0.0) << item.key();
  }
}

// ----------------------------------------------------------------------------
// Attention

TEST(Attention, RowsAreStochastic) { EXPECT_LE(checks::attention_row_sum_error(100), 1e-6); }

TEST(Attention, CrossEqualsSelfWhenContextIsLocal) {
  EXPECT_LE(checks::cross_equals_self_error(), 1e-6);
}

TEST(Attention, MatchesLoopOracle) { EXPECT_LE(checks::attention_oracle_error(), 1e-8); }

TEST(Attention, SingletonContextIgnoresQueries) {
  torch::manual_seed(6);
  MultiHeadAttention mha(8, 2);
  mha->to(torch::kDouble);
  auto t_l = torch::randn({1, 5, 8}, kDouble);
  auto t_c = torch::randn({1, 1, 8}, kDouble);
  torch::NoGradGuard no_grad;
  auto out = cross_attention(mha, t_l, t_c);
  auto expected = mha->output(mha->value(t_c));
  for (int64_t i = 0; i < 5; ++i) {
    EXPECT_LE((out[0][i] - expected[0][0]).abs().max().item<double>(), 1e-12);
  }
}

TEST(Attention, IdenticalKeysGiveUniformWeights) {
  torch::manual_seed(7);
  MultiHeadAttention mha(8, 4);
  auto t_l = torch::randn({2, 3, 8});
  auto t_c = torch::randn({2, 1, 8}).expand({2, 6, 8});
  torch::NoGradGuard no_grad;
  auto a = mha->attention(t_l, t_c);
  EXPECT_LE((a - 1.0 / 6.0).abs().max().item<double>(), 1e-6);
}

TEST(Attention, TinyQueryScaleGivesUniformWeights) {
  torch::manual_seed(8);
  MultiHeadAttention mha(8, 2);
  torch::NoGradGuard no_grad;
  auto a = mha->attention(torch::randn({1, 4, 8}) * 10, torch::randn({1, 5, 8}) * 10, 1e-6);
  EXPECT_LE((a - 0.2).abs().max().item<double>(), 1e-4);
}

TEST(Attention, TwoTokenClosedForm) {
  // One head, identity projections: a = softmax([q.k1, q.k2] / sqrt(d)).
  MultiHeadAttention mha(2, 1);
  mha->to(torch::kDouble);
  torch::NoGradGuard no_grad;
  for (auto* lin : {&mha->query, &mha->key, &mha->value, &mha->output}) {
    (*lin)->weight.copy_(torch::eye(2, kDouble));
  }
  mha->output->bias.zero_();
  auto q = torch::tensor({1.0, 2.0}, kDouble).view({1, 1, 2});
  auto k = torch::tensor({{0.5, -1.0}, {3.0, 1.0}}, kDouble).view({1, 2, 2});
  auto [out, a] = mha->forward_with_attention(q, k);
  const double s1 = (0.5 - 2.0) / std::sqrt(2.0);
  const double s2 = (3.0 + 2.0) / std::sqrt(2.0);
  const double a1 = std::exp(s1) / (std::exp(s1) + std::exp(s2));
  EXPECT_NEAR(a[0][0][0][0].item<double>(), a1, 1e-12);
  EXPECT_NEAR(out[0][0][0].item<double>(), a1 * 0.5 + (1 - a1) * 3.0, 1e-12);
  EXPECT_NEAR(out[0][0][1].item<double>(), a1 * -1.0 + (1 - a1) * 1.0, 1e-12);
}

TEST(Attention, ContextPermutationInvariant) {
  torch::manual_seed(9);
  MultiHeadAttention mha(8, 2);
  auto t_l = torch::randn({1, 4, 8});
  auto t_c = torch::randn({1, 7, 8});
  auto perm = torch::randperm(7);
  torch::NoGradGuard no_grad;
  auto a = cross_attention(mha, t_l, t_c);
  auto b = cross_attention(mha, t_l, t_c.index_select(1, perm));
  EXPECT_LE((a - b).abs().max().item<double>(), 1e-5);
}

TEST(Attention, RejectsBadContext) {
  MultiHeadAttention mha(8, 2);
  EXPECT_THROW(cross_attention(mha, torch::randn({1, 4, 8}), torch::randn({1, 0, 8})),
               ContractViolation);
  EXPECT_THROW(cross_attention(mha, torch::randn({1, 4, 8}), torch::randn({1, 3, 4})),
               ContractViolation);
  EXPECT_THROW(MultiHeadAttention(10, 3), ConfigError);
}

// ----------------------------------------------------------------------------
// Context block and transformer

TransformerConfig small_transformer() {
  TransformerConfig c;
  c.width = 8;
  c.heads = 2;
  c.blocks = 2;
  return c;
}

TEST(ContextBlock, ZeroedResidualBranchesAreIdentity) {
  ContextBlock block(small_transformer());
  torch::NoGradGuard no_grad;
  block->attention->output->weight.zero_();
  block->attention->output->bias.zero_();
  block->mlp->fc2->weight.zero_();
  block->mlp->fc2->bias.zero_();
  auto t_l = torch::randn({2, 3, 8});
  auto t_c = torch::randn({2, 5, 8});
  auto [l, c] = block(t_l, t_c);
  EXPECT_TRUE(torch::equal(l, t_l));
  EXPECT_TRUE(torch::equal(c, t_c));
}

TEST(ContextBlock, ComposesAttentionThenMlp) {
  torch::manual_seed(10);
  ContextBlock block(small_transformer());
  auto t_l = torch::randn({2, 3, 8});
  auto t_c = torch::randn({2, 5, 8});
  torch::NoGradGuard no_grad;
  auto mid = t_l + block->attention(block->norm_local(t_l), block->norm_context(t_c));
  auto expected = mid + block->mlp(block->norm_mlp(mid));
  auto [l, c] = block(t_l, t_c);
  EXPECT_LE((l - expected).abs().max().item<double>(), 1e-6);
  EXPECT_TRUE(torch::equal(c, t_c));
}

TEST(ContextBlock, GradientMatchesFiniteDifferences) {
  EXPECT_LE(checks::context_block_gradient_error(), 1e-4);
}

TEST(ContextTransformer, ZeroBlocksReturnsEmbedding) {
  auto c = small_transformer();
  c.blocks = 0;
  ContextTransformer t(c, TransformerMode::kCross, 6, 4, 4, 5, 3, 3);
  FeatureMap local{torch::randn({1, 6, 4, 4}), 8};
  FeatureMap context{torch::randn({1, 5, 3, 3}), 8};
  torch::NoGradGuard no_grad;
  auto [l, ctx] = t(local, context);
  auto emb = tokens_to_map(t->local_embedding(local));
  EXPECT_TRUE(torch::allclose(l.values, emb));
  EXPECT_EQ(ctx.values.sizes(), torch::IntArrayRef({1, 8, 3, 3}));
}

TEST(ContextTransformer, DefaultTokenCounts) {
  TransformerConfig c;
  ContextTransformer t(c, TransformerMode::kCross, 512, 32, 32, 512, 24, 24);
  torch::NoGradGuard no_grad;
  auto l = t->local_embedding(FeatureMap{torch::zeros({1, 512, 32, 32}), 8});
  auto ctx = t->context_embedding(FeatureMap{torch::zeros({1, 512, 24, 24}), 8});
  EXPECT_EQ(l.count(), 1024);
  EXPECT_EQ(ctx.count(), 576);
  EXPECT_EQ(l.width(), 512);
}

TEST(PatchEmbedding, FlattenOrderAndRoundTrip) {
  auto x = torch::arange(2 * 4 * 4, torch::kFloat).view({1, 2, 4, 4});
  auto p = flatten_patches(x, 2);
  EXPECT_EQ(p.sizes(), torch::IntArrayRef({1, 4, 8}));
  // First patch: channel 0 rows 0-1 cols 0-1, then channel 1.
  EXPECT_TRUE(torch::equal(p[0][0], torch::tensor({0.f, 1.f, 4.f, 5.f, 16.f, 17.f, 20.f, 21.f})));
  auto tokens = flatten_patches(x, 1);
  EXPECT_TRUE(torch::equal(tokens_to_map({tokens, 4, 4}), x));
  EXPECT_THROW(flatten_patches(torch::zeros({1, 2, 5, 4}), 2), GeometryError);
}

TEST(PatchEmbedding, RejectsGridMismatch) {
  PatchEmbedding e(4, 1, 8, 3, 3, 0.02);
  EXPECT_THROW(e(FeatureMap{torch::zeros({1, 4, 4, 4}), 8}), GeometryError);
}

// ----------------------------------------------------------------------------
// Full model

TEST(Model, VariantOutputShapes) {
  torch::NoGradGuard no_grad;
  for (auto v : {Variant::kLocalOnly, Variant::kLocalSelfAttn, Variant::kWideContext}) {
    SegmentationModel m(ModelConfig::toy(v, 4, 64));
    m->eval();
    auto out = m->forward(torch::randn({2, 3, 64, 64}), torch::randn({2, 3, 48, 48}));
    EXPECT_EQ(out.local.sizes(), torch::IntArrayRef({2, 4, 64, 64}));
    EXPECT_EQ(out.context.has_value(), v == Variant::kWideContext);
    if (out.context) EXPECT_EQ(out.context->sizes(), torch::IntArrayRef({2, 4, 48, 48}));
  }
}

TEST(Model, WideContextNeedsContext) {
  SegmentationModel m(ModelConfig::toy(Variant::kWideContext, 4, 64));
  EXPECT_THROW(m->forward(torch::randn({1, 3, 64, 64})), ContractViolation);
  EXPECT_THROW(m->forward(torch::randn({1, 3, 64, 64}), torch::randn({1, 3, 40, 40})),
               GeometryError);
  EXPECT_THROW(m->forward(torch::randn({1, 3, 48, 48})), GeometryError);
}

TEST(Model, ConfigRejectsIndivisibleGeometry) {
  auto c = ModelConfig::toy(Variant::kLocalOnly, 4, 64);
  c.geometry.local_height = 60;
  c.geometry.local_width = 60;
  EXPECT_THROW(c.validate(), Error);
  auto t = ModelConfig::toy(Variant::kWideContext, 4, 64);
  t.transformer.heads = 3;
  EXPECT_THROW(t.validate(), ConfigError);
}

TEST(Model, WeightSurgeryReducesWideContextToLocalOnly) {
  torch::manual_seed(11);
  SegmentationModel base(ModelConfig::toy(Variant::kLocalOnly, 4, 64));
  SegmentationModel wide(ModelConfig::toy(Variant::kWideContext, 4, 64));
  base->eval();
  wide->eval();
  torch::NoGradGuard no_grad;
  auto copy = [](torch::nn::Module& dst, const torch::nn::Module& src) {
    auto from = src.named_parameters();
    for (auto& p : dst.named_parameters()) p.value().copy_(from[p.key()]);
    auto from_b = src.named_buffers();
    for (auto& b : dst.named_buffers()) b.value().copy_(from_b[b.key()]);
  };
  copy(*wide->local_encoder, *base->local_encoder);
  copy(*wide->local_reduce, *base->local_reduce);
  copy(*wide->local_head, *base->local_head);
  auto& emb = wide->transformer->local_embedding;
  emb->projection->weight.copy_(torch::eye(32));
  emb->projection->bias.zero_();
  emb->position.zero_();
  for (auto& block : wide->transformer->blocks) {
    block->attention->output->weight.zero_();
    block->attention->output->bias.zero_();
    block->mlp->fc2->weight.zero_();
    block->mlp->fc2->bias.zero_();
  }
  auto x = torch::randn({2, 3, 64, 64});
  auto a = base->forward(x).local;
  auto b = wide->forward(x, torch::randn({2, 3, 48, 48})).local;
  EXPECT_LE((a - b).abs().max().item<double>(), 1e-5);
}

TEST(ClassifierHead, ZeroFeaturesGiveClosedFormConstant) {
  torch::manual_seed(12);
  ClassifierHead head(6, 5, 3);
  torch::NoGradGuard no_grad;
  auto out = head(torch::zeros({1, 6, 4, 4}), 32, 32);
  EXPECT_EQ(out.sizes(), torch::IntArrayRef({1, 3, 32, 32}));
  auto hidden = torch::relu(head->hidden->bias);
  auto expected = torch::matmul(head->classify->weight.view({3, 5}), hidden) +
                  head->classify->bias;
  for (int64_t k = 0; k < 3; ++k) {
    EXPECT_LE((out[0][k] - expected[k]).abs().max().item<double>(), 1e-6);
  }
}

double bilinear_weight(int64_t out, int64_t in_size, int64_t out_size, int64_t source) {
  const double scale = static_cast<double>(in_size) / static_cast<double>(out_size);
  double s = (static_cast<double>(out) + 0.5) * scale - 0.5;
  if (s < 0) s = 0;
  const auto i0 = static_cast<int64_t>(std::floor(s));
  const int64_t i1 = std::min(i0 + 1, in_size - 1);
  const double l = s - static_cast<double>(i0);
  double w = 0.0;
  if (i0 == source) w += 1.0 - l;
  if (i1 == source) w += l;
  return w;
}

TEST(Upsample, BilinearDeltaKernelOracle) {
  auto delta = torch::zeros({1, 1, 4, 5}, kDouble);
  delta[0][0][1][3] = 1.0;
  auto up = upsample_bilinear(delta, 16, 20);
  for (int64_t r = 0; r < 16; ++r) {
    for (int64_t c = 0; c < 20; ++c) {
      const double want = bilinear_weight(r, 4, 16, 1) * bilinear_weight(c, 5, 20, 3);
      ASSERT_NEAR(up[0][0][r][c].item<double>(), want, 1e-12) << r << "," << c;
    }
  }
}

TEST(Model, EvalIsDeterministic) {
  torch::manual_seed(13);
  SegmentationModel m(ModelConfig::toy(Variant::kWideContext, 4, 64));
  m->eval();
  torch::NoGradGuard no_grad;
  auto x = torch::randn({2, 3, 64, 64});
  auto c = torch::randn({2, 3, 48, 48});
  EXPECT_TRUE(torch::equal(m->forward(x, c).local, m->forward(x, c).local));
}

TEST(Model, OneStepReducesLoss) {
  torch::manual_seed(14);
  SegmentationModel m(ModelConfig::toy(Variant::kWideContext, 4, 64));
  auto x = torch::randn({4, 3, 64, 64});
  auto c = torch::randn({4, 3, 48, 48});
  auto y = torch::randint(0, 4, {4, 64, 64}, torch::kLong);
  auto yc = torch::randint(0, 4, {4, 48, 48}, torch::kLong);
  SgdMomentum opt(m->parameters(), 0.0);
  auto loss = [&] {
    auto out = m->forward(x, c);
    return dual_loss(out.local, y, out.context, yc, 1.0).total;
  };
  m->train();
  auto before = loss();
  opt.zero_grad();
  before.backward();
  opt.step(1e-3);
  EXPECT_LT(loss().item<double>(), before.item<double>());
}

TEST(Model, DefaultParameterCountNearReference) {
  SegmentationModel m(ModelConfig::defaults());
  const double n = static_cast<double>(count_parameters(*m));
  RecordProperty("parameters", std::to_string(static_cast<int64_t>(n)));
  EXPECT_GE(n, 0.8 * 38.24e6);
  EXPECT_LE(n, 1.2 * 38.24e6);
}

TEST(Model, GradientModelFitsBudget) {
  int64_t count = 0;
  SegmentationModel m(checks::gradient_model_config());
  count = count_parameters(*m);
  EXPECT_LE(count, 5000);
}

}  // namespace
}  // namespace wiconet
