// Copyright 2026 The encdec Authors.
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

#include <random>

#include <gtest/gtest.h>

#include "encdec/model.hpp"

namespace encdec {
namespace {

ModelConfig small_config() {
  ModelConfig c;
  c.d_model = 16;
  c.n_heads = 2;
  c.n_enc_layers = 2;
  c.n_dec_layers = 2;
  c.d_ff = 32;
  c.vocab_size = 24;
  c.max_len = 40;
  return c;
}

using TokenSeq = std::vector<TokenId>;

TokenSeq random_tokens(std::size_t n, std::size_t vocab, std::mt19937& rng) {
  std::uniform_int_distribution<TokenId> dist(kFirstFreeToken, static_cast<TokenId>(vocab - 1));
  TokenSeq t(n);
  for (auto& x : t) x = dist(rng);
  return t;
}

float max_abs_diff(std::span<const float> a, std::span<const float> b) {
  float m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

TEST(InitWeightsTest, SameSeedIsBitIdentical) {
  const ModelConfig c = small_config();
  EXPECT_EQ(weight_checksum(init_weights(c, 42)), weight_checksum(init_weights(c, 42)));
}

TEST(InitWeightsTest, DifferentSeedsDiffer) {
  const ModelConfig c = small_config();
  EXPECT_NE(weight_checksum(init_weights(c, 1)), weight_checksum(init_weights(c, 2)));
}

TEST(InitWeightsTest, EntriesInRangeAndGainsAreOne) {
  WeightSet w = init_weights(small_config(), 3);
  for_each_parameter(w, [](const std::string& name, std::span<const float> v) {
    for (float x : v) {
      if (name.find("ln") != std::string::npos) {
        EXPECT_EQ(x, 1.f) << name;
      } else {
        EXPECT_GE(x, -kInitRange) << name;
        EXPECT_LT(x, kInitRange) << name;
      }
    }
  });
}

TEST(InitWeightsTest, IndivisibleHeadsIsConfigError) {
  ModelConfig c = small_config();
  c.d_model = 8;
  c.n_heads = 3;
  EXPECT_THROW(init_weights(c, 1), ConfigError);
  c.n_heads = 4;
  c.n_enc_layers = 0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(PositionalEncodingTest, MatchesSinusoidFormula) {
  Matrix pe = positional_encoding<float>(3, 2, 4);
  EXPECT_NEAR(pe(0, 0), std::sin(3.0), 1e-6);
  EXPECT_NEAR(pe(0, 1), std::cos(3.0), 1e-6);
  EXPECT_NEAR(pe(1, 2), std::sin(4.0 / 100.0), 1e-6);
  EXPECT_NEAR(pe(1, 3), std::cos(4.0 / 100.0), 1e-6);
}

TEST(EncoderTest, EmptyAndOverlengthInputsAreLengthErrors) {
  const ModelConfig c = small_config();
  WeightSet w = init_weights(c, 1);
  CounterSet counters;
  EXPECT_THROW(encoder_forward(c, w, std::span<const TokenId>(), counters), LengthError);
  TokenSeq long_seq(c.max_len + 1, kFirstFreeToken);
  EXPECT_THROW(encoder_forward(c, w, std::span<const TokenId>(long_seq), counters), LengthError);
  TokenSeq bad{static_cast<TokenId>(c.vocab_size)};
  EXPECT_THROW(encoder_forward(c, w, std::span<const TokenId>(bad), counters), UsageError);
}

TEST(EncoderTest, DeterministicAndBatchReplicatesRows) {
  const ModelConfig c = small_config();
  WeightSet w = init_weights(c, 5);
  std::mt19937 rng(5);
  TokenSeq x = random_tokens(9, c.vocab_size, rng);
  CounterSet c1, c2;
  Matrix m1 = encoder_forward(c, w, std::span<const TokenId>(x), c1);
  auto batch = encoder_forward_batch(c, w, {x, x}, c2);
  ASSERT_EQ(batch.size(), 2u);
  EXPECT_EQ(batch[0], m1);
  EXPECT_EQ(batch[1], m1);
  EXPECT_EQ(c2.total().flops, 2 * c1.total().flops);
  EXPECT_TRUE(all_finite(m1));
}

TEST(DecoderTest, FreshBosStepMatchesFullForward) {
  const ModelConfig c = small_config();
  WeightSet w = init_weights(c, 8);
  std::mt19937 rng(8);
  TokenSeq x = random_tokens(7, c.vocab_size, rng);
  CounterSet counters;
  Matrix m = encoder_forward(c, w, std::span<const TokenId>(x), counters);
  KVCacheSet state;
  state.cross.push_back(project_cross_kv(c, w, m, counters));
  state.add_stream(c.n_dec_layers, 0);
  const std::vector<std::size_t> streams{0};
  const TokenSeq bos{kBosToken};
  Matrix step = decoder_step(c, w, state, streams, bos, 1, counters);
  Matrix full = decoder_forward_full(c, w, state.cross[0], std::span<const TokenId>(bos), counters);
  EXPECT_EQ(max_abs_diff(step.row(0), full.row(0)), 0.f);
  EXPECT_EQ(state.self[0].length, 1u);
  EXPECT_EQ(state.self[0].layers[0].k.rows(), 1u);
}

// Incremental decoding must reproduce a whole-sequence re-forward.
TEST(DecoderTest, IncrementalMatchesFullForwardTwentySeeds) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    ModelConfig c = small_config();
    const std::size_t heads[] = {1, 2, 4};
    c.n_heads = heads[seed % 3];
    WeightSet w = init_weights(c, seed);
    std::mt19937 rng(static_cast<unsigned>(seed));
    const std::size_t n_t = 1 + seed % 16;
    const std::size_t prefix = 1 + seed % 3;
    TokenSeq x = random_tokens(3 + seed % 11, c.vocab_size, rng);
    TokenSeq y = random_tokens(prefix + n_t, c.vocab_size, rng);
    CounterSet counters;
    Matrix m = encoder_forward(c, w, std::span<const TokenId>(x), counters);
    KVCacheSet state;
    state.cross.push_back(project_cross_kv(c, w, m, counters));
    state.add_stream(c.n_dec_layers, 0);
    const std::vector<std::size_t> streams{0};
    Matrix full = decoder_forward_full(c, w, state.cross[0], std::span<const TokenId>(y), counters);

    Matrix inc = decoder_step(c, w, state, streams, std::span<const TokenId>(y).first(prefix),
                              prefix, counters);
    float worst = max_abs_diff(inc.row(0), full.row(prefix - 1));
    for (std::size_t t = prefix; t < y.size(); ++t) {
      inc = decoder_step(c, w, state, streams, std::span<const TokenId>(y).subspan(t, 1), 1,
                         counters);
      worst = std::max(worst, max_abs_diff(inc.row(0), full.row(t)));
    }
    EXPECT_LE(worst, 1e-4f) << "seed " << seed;
  }
}

TEST(DecoderTest, CacheOverflowIsLengthError) {
  ModelConfig c = small_config();
  c.max_len = 3;
  WeightSet w = init_weights(c, 1);
  CounterSet counters;
  TokenSeq x{5, 6};
  Matrix m = encoder_forward(c, w, std::span<const TokenId>(x), counters);
  KVCacheSet state;
  state.cross.push_back(project_cross_kv(c, w, m, counters));
  state.add_stream(c.n_dec_layers, 0);
  const std::vector<std::size_t> streams{0};
  TokenSeq block{1, 5, 6};
  decoder_step(c, w, state, streams, block, 3, counters);
  TokenSeq one{7};
  EXPECT_THROW(decoder_step(c, w, state, streams, one, 1, counters), LengthError);
  EXPECT_EQ(state.self[0].length, 3u);
}

TEST(DecoderTest, BatchedStreamsMatchSeparateStreams) {
  const ModelConfig c = small_config();
  WeightSet w = init_weights(c, 13);
  std::mt19937 rng(13);
  TokenSeq x = random_tokens(6, c.vocab_size, rng);
  CounterSet counters;
  Matrix m = encoder_forward(c, w, std::span<const TokenId>(x), counters);
  KVCacheSet batched;
  batched.cross.push_back(project_cross_kv(c, w, m, counters));
  TokenSeq blocks;
  std::vector<TokenSeq> per_stream;
  for (int s = 0; s < 3; ++s) {
    batched.add_stream(c.n_dec_layers, 0);
    per_stream.push_back(random_tokens(2, c.vocab_size, rng));
    blocks.insert(blocks.end(), per_stream.back().begin(), per_stream.back().end());
  }
  const std::vector<std::size_t> all{0, 1, 2};
  Matrix logits = decoder_step(c, w, batched, all, blocks, 2, counters);
  for (int s = 0; s < 3; ++s) {
    KVCacheSet alone;
    alone.cross.push_back(batched.cross[0]);
    alone.add_stream(c.n_dec_layers, 0);
    const std::vector<std::size_t> one{0};
    Matrix l = decoder_step(c, w, alone, one, per_stream[s], 2, counters);
    EXPECT_EQ(max_abs_diff(l.row(0), logits.row(s)), 0.f);
  }
}

}  // namespace
}  // namespace encdec
