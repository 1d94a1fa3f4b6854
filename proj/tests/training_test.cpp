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

#include <algorithm>
#include <cmath>
#include <set>

#include <gtest/gtest.h>

#include "encdec/flop_model.hpp"
#include "encdec/synthetic.hpp"
#include "encdec/training.hpp"
#include "test_util.hpp"

namespace encdec {
namespace {

using testing::max_abs_diff;
using testing::toy_config;

TEST(Synthetic, ValueRecoverableBySearch) {
  const SyntheticTask t = make_synthetic_task(3, 4, 12, 32, 200);
  EXPECT_EQ(t.value_len, 2u);
  for (const auto& ex : t.train) {
    ASSERT_EQ(ex.instance.input.size(), 12u);
    for (std::size_t u = 0; u < 4; ++u) {
      const TokenId key = ex.instance.prompts[u].at(0);
      const auto& x = ex.instance.input;
      ASSERT_EQ(std::count(x.begin(), x.end(), key), 1);
      const auto at = std::find(x.begin(), x.end(), key) - x.begin();
      const TokenSeq value(x.begin() + at + 1, x.begin() + at + 3);
      TokenSeq expected = value;
      expected.push_back(kEosToken);
      EXPECT_EQ(ex.targets[u], expected);
    }
  }
}

TEST(Synthetic, Deterministic) {
  const SyntheticTask a = make_synthetic_task(5, 3, 6, 24, 50);
  const SyntheticTask b = make_synthetic_task(5, 3, 6, 24, 50);
  ASSERT_EQ(a.train.size(), b.train.size());
  for (std::size_t i = 0; i < a.train.size(); ++i) {
    EXPECT_EQ(a.train[i].instance.input, b.train[i].instance.input);
    EXPECT_EQ(a.train[i].targets, b.train[i].targets);
  }
  EXPECT_NE(make_synthetic_task(6, 3, 6, 24, 50).train[0].instance.input, a.train[0].instance.input);
}

TEST(Synthetic, SplitsDisjointByHash) {
  const SyntheticTask t = make_synthetic_task(1, 4, 8, 32, 1000);
  EXPECT_EQ(t.train.size() + t.heldout.size(), 1000u);
  std::set<TokenSeq> train;
  for (const auto& ex : t.train) {
    EXPECT_FALSE(is_heldout(ex.instance));
    train.insert(ex.instance.input);
  }
  for (const auto& ex : t.heldout) {
    EXPECT_TRUE(is_heldout(ex.instance));
    EXPECT_EQ(train.count(ex.instance.input), 0u);
  }
  const double frac = static_cast<double>(t.heldout.size()) / 1000.0;
  EXPECT_GT(frac, 0.12);
  EXPECT_LT(frac, 0.28);
}

TEST(Synthetic, RejectsBadShapes) {
  EXPECT_THROW(make_synthetic_task(1, 4, 10, 32, 10), UsageError);
  EXPECT_THROW(make_synthetic_task(1, 4, 4, 32, 10), UsageError);
  EXPECT_THROW(make_synthetic_task(1, 4, 8, 9, 10), UsageError);
}

// The training graph recomputes what the inference forward pass computes.
TEST(TrainingGraph, LogitsMatchDecoderForward) {
  const ModelConfig config = toy_config(16, 2, 2, 32, 64);
  const Model model = testing::sharpened_model(config, 2, 4.f);
  const SyntheticTask t = make_synthetic_task(2, 3, 6, 32, 10);
  const SyntheticExample& ex = t.train[0];
  for (EngineKind kind : {EngineKind::pie, EngineKind::pid}) {
    for (std::size_t u = 0; u < 3; ++u) {
      CounterSet c;
      Matrix m = encoder_forward(config, model.weights,
                                 std::span<const TokenId>(encoder_input(kind, ex.instance, u)), c);
      const CrossKv<float> kv = project_cross_kv(config, model.weights, m, c);
      TokenSeq dec = decoder_prefix(kind, ex.instance, u);
      const std::size_t first = dec.size() - 1;
      dec.insert(dec.end(), ex.targets[u].begin(), ex.targets[u].end() - 1);
      const Matrix full = decoder_forward_full(config, model.weights, kv, std::span<const TokenId>(dec), c);

      Graph<float> g;
      WeightSet grads = zero_gradients<float>(config);
      const GraphParams<float> p = bind_parameters(g, model.weights, grads);
      const auto gm = detail::graph_encoder(g, p, config, encoder_input(kind, ex.instance, u), c);
      const auto gkv = detail::graph_cross_kv(g, p, gm, c);
      const auto logits = detail::graph_decoder(g, p, config, gkv, dec, first, c);
      EXPECT_LE(max_abs_diff(g.value(logits), full.slice_rows(first, full.rows() - first)), 1e-5f);
    }
  }
}

TEST(TrainingGraph, ForwardFlopsMatchPrediction) {
  const ModelConfig config = toy_config(16, 2, 2, 32, 64);
  const Model model = Model::create(config, 1);
  const SyntheticTask t = make_synthetic_task(2, 4, 12, 32, 10);
  for (EngineKind kind : {EngineKind::pie, EngineKind::pid}) {
    CounterSet c;
    Graph<float> g;
    WeightSet grads = zero_gradients<float>(config);
    const GraphParams<float> p = bind_parameters(g, model.weights, grads);
    example_loss(g, p, config, t.train[0], kind, c);
    const InferenceShape s{1, 4, 12, t.value_len + 1, 1};
    const CounterSet predicted = predict_training_forward_flops(config, s, kind);
    for (Component comp : kAllComponents) {
      if (comp == Component::other) continue;  // loss arithmetic
      EXPECT_EQ(c.at(comp).flops, predicted.at(comp).flops) << to_string(kind) << " " << to_string(comp);
    }
  }
}

TEST(GradientCheck, MatchesFiniteDifferences) {
  const ModelConfig config = toy_config(8, 2, 1, 16, 32);
  const SyntheticTask t = make_synthetic_task(4, 2, 6, 16, 5);
  for (EngineKind kind : {EngineKind::pie, EngineKind::pid}) {
    const GradientCheckResult r = gradient_check(config, 7, t.train[0], kind, 3);
    EXPECT_GT(r.checked, 50u);
    EXPECT_LE(r.max_relative_error, 1e-3) << to_string(kind) << " worst " << r.worst_parameter;
  }
}

TEST(TrainStep, FirstLossNearUniformEntropy) {
  const ModelConfig config = toy_config(16, 2, 2, 32, 64);
  const SyntheticTask t = make_synthetic_task(8, 4, 8, 32, 40);
  std::vector<const SyntheticExample*> batch;
  for (std::size_t i = 0; i < 8; ++i) batch.push_back(&t.train[i]);
  for (EngineKind kind : {EngineKind::pie, EngineKind::pid}) {
    Model model = Model::create(config, 3);
    CounterSet c;
    const float loss = train_step(model, batch, 0.1f, kind, c);
    EXPECT_NEAR(loss, std::log(32.0), 0.1 * std::log(32.0)) << to_string(kind);
  }
}

TEST(TrainStep, LossDecreasesOnRepeatedBatch) {
  const ModelConfig config = toy_config(16, 2, 1, 32, 64);
  const SyntheticTask t = make_synthetic_task(8, 4, 8, 32, 20);
  std::vector<const SyntheticExample*> batch = {&t.train[0], &t.train[1]};
  Model model = Model::create(config, 3);
  scale_for_training(model, 4.f, 10.f);
  CounterSet c;
  const float first = train_step(model, batch, 0.1f, EngineKind::pid, c);
  float last = first;
  for (int i = 0; i < 30; ++i) last = train_step(model, batch, 0.1f, EngineKind::pid, c);
  EXPECT_LT(last, 0.5f * first);
}

TEST(TrainStep, NonFiniteLossReportsStep) {
  const ModelConfig config = toy_config(8, 2, 1, 16, 32);
  const SyntheticTask t = make_synthetic_task(1, 2, 4, 16, 5);
  Model model = Model::create(config, 1);
  model.weights.lm_head(0, 0) = NAN;
  CounterSet c;
  try {
    train_step(model, {&t.train[0]}, 0.1f, EngineKind::pid, c, 7);
    FAIL() << "expected TrainingError";
  } catch (const TrainingError& e) {
    EXPECT_EQ(e.step(), 7u);
  }
}

TEST(TrainStep, BackwardCostsAboutTwoForwards) {
  const ModelConfig config = toy_config(16, 2, 2, 32, 64);
  const Model model = Model::create(config, 1);
  const SyntheticTask t = make_synthetic_task(2, 4, 8, 32, 10);
  for (EngineKind kind : {EngineKind::pie, EngineKind::pid}) {
    CounterSet fwd, both;
    {
      Graph<float> g;
      WeightSet grads = zero_gradients<float>(config);
      example_loss(g, bind_parameters(g, model.weights, grads), config, t.train[0], kind, fwd);
    }
    WeightSet grads = zero_gradients<float>(config);
    batch_loss_and_gradients<float>(config, model.weights, {&t.train[0]}, kind, grads, both);
    const double ratio = static_cast<double>(both.total().flops) / static_cast<double>(fwd.total().flops);
    EXPECT_GT(ratio, 2.5);
    EXPECT_LT(ratio, 3.5);
  }
}

TEST(TrainingFlops, PidEpochCheaperAndNearPrediction) {
  const ModelConfig config = toy_config(16, 2, 2, 32, 64);
  const SyntheticTask t = make_synthetic_task(2, 4, 8, 32, 30);
  TrainOptions o;
  o.epochs = 1;
  double measured[2];
  for (EngineKind kind : {EngineKind::pie, EngineKind::pid}) {
    Model model = Model::create(config, 1);
    const TrainReport r = train(model, t, kind, o);
    measured[kind == EngineKind::pid] = static_cast<double>(r.epochs[0].counters.total().flops);
  }
  const InferenceShape s{1, 4, 8, 2, 1};
  const double predicted = predict_training_step_flops(config, s, EngineKind::pie) /
                           predict_training_step_flops(config, s, EngineKind::pid);
  EXPECT_LT(measured[1], measured[0]);
  EXPECT_LE(std::abs(measured[0] / measured[1] - predicted) / predicted, 0.25);
}

TEST(Train, ZeroEpochsNearChance) {
  ToyTrainingSetup setup;
  const SyntheticTask t = make_synthetic_task(1, setup.num_prompts, setup.input_len(),
                                              setup.config.vocab_size, 300);
  Model model = make_training_model(setup, 1);
  TrainOptions o;
  o.epochs = 0;
  const TrainReport r = train(model, t, EngineKind::pid, o);
  EXPECT_TRUE(r.epochs.empty());
  EXPECT_LE(r.final_exact_match, 3.0 / static_cast<double>(setup.config.vocab_size));
}

}  // namespace
}  // namespace encdec
