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

#include <future>
#include <numeric>
#include <set>

#include <gtest/gtest.h>

#include "encdec/engines.hpp"
#include "test_util.hpp"

namespace encdec {
namespace {

using testing::max_logit_diff;
using testing::random_workload;
using testing::toy_config;

EngineOptions recording() {
  EngineOptions o;
  o.record_logits = true;
  return o;
}

TEST(GreedyTest, UniqueArgmax) {
  EXPECT_EQ(greedy_decode(Matrix{{0, 0, 5}}), std::vector<TokenId>{2});
}

TEST(GreedyTest, TieGoesToLowestId) {
  EXPECT_EQ(greedy_decode(Matrix{{1, 1}}), std::vector<TokenId>{0});
}

TEST(GreedyTest, NoActiveStreamsIsNoOp) {
  EXPECT_TRUE(greedy_decode(Matrix(0, 8)).empty());
}

TEST(EnginesTest, SingleEmptyPromptMakesConfigurationsCoincide) {
  Model model = Model::create(toy_config(), 3);
  Workload wl = random_workload(3, 32, 2, 1, 11, 0, 6);
  DecodeResult pie = pie_infer(model, wl), pid = pid_infer(model, wl);
  EXPECT_EQ(pie.outputs, pid.outputs);
  EXPECT_EQ(pie.encode_counters, pid.encode_counters);
  EXPECT_EQ(pie.counters(), pid.counters());
}

TEST(EnginesTest, DuplicatePromptsGiveIdenticalOutputs) {
  Model model = Model::create(toy_config(), 4);
  Workload wl = random_workload(4, 32, 1, 2, 10, 3, 8);
  wl.instances[0].prompts[1] = wl.instances[0].prompts[0];
  for (EngineKind k : {EngineKind::pie, EngineKind::pid}) {
    DecodeResult r = infer(k, model, wl);
    EXPECT_EQ(r.outputs[0][0], r.outputs[0][1]) << to_string(k);
  }
}

TEST(EnginesTest, EncoderPassCounts) {
  Model model = Model::create(toy_config(), 5);
  Workload wl = random_workload(5, 32, 3, 4, 8, 2, 3);
  EXPECT_EQ(pie_infer(model, wl).encoder_passes, 12u);
  EXPECT_EQ(pid_infer(model, wl).encoder_passes, 3u);
}

TEST(EnginesTest, EncoderFlopsScaleWithPromptCount) {
  Model model = Model::create(toy_config(16, 2, 1, 32, 600), 6);
  Workload wl = random_workload(6, 32, 1, 10, 512, 4, 1);
  const double pie = static_cast<double>(pie_infer(model, wl).encode_counters.total().flops);
  const double pid = static_cast<double>(pid_infer(model, wl).encode_counters.total().flops);
  EXPECT_NEAR(pie / pid, 10.0, 0.5);
}

TEST(EnginesTest, EncoderFlopsRatioIsExactlyUWithoutPrompts) {
  Model model = Model::create(toy_config(), 7);
  for (std::size_t u : {2u, 5u}) {
    Workload wl = random_workload(7, 32, 2, u, 12, 0, 2);
    const auto pie = pie_infer(model, wl).encode_counters.total().flops;
    const auto pid = pid_infer(model, wl).encode_counters.total().flops;
    EXPECT_EQ(pie, u * pid);
  }
}

TEST(EnginesTest, BroadcastMatchesExplicitCopies) {
  Model model = Model::create(toy_config(), 8);
  Workload wl = random_workload(8, 32, 2, 4, 14, 2, 6);
  EngineOptions shared = recording();
  EngineOptions copies = recording();
  copies.cross_kv = CrossKvMode::replicated;
  DecodeResult a = pid_infer(model, wl, shared);
  DecodeResult b = pid_infer(model, wl, copies);
  EXPECT_EQ(a.outputs, b.outputs);
  EXPECT_LE(max_logit_diff(a, b), 1e-6f);
  EXPECT_LT(a.cross_kv_bytes * 4, b.cross_kv_bytes + 1);
}

TEST(EnginesTest, CorruptedSharedKvBreaksEquivalence) {
  Model model = Model::create(toy_config(), 8);
  Workload wl = random_workload(8, 32, 1, 3, 14, 2, 4);
  EngineOptions bad = recording();
  bad.corrupt_shared_kv = true;
  EngineOptions copies = recording();
  copies.cross_kv = CrossKvMode::replicated;
  EXPECT_GT(max_logit_diff(pid_infer(model, wl, bad), pid_infer(model, wl, copies)), 1e-6f);
}

TEST(EnginesTest, CrossKvStorage) {
  Model model = Model::create(toy_config(), 9);
  const auto pid2 = pid_infer(model, random_workload(9, 32, 1, 2, 10, 0, 1)).cross_kv_bytes;
  const auto pid8 = pid_infer(model, random_workload(9, 32, 1, 8, 10, 0, 1)).cross_kv_bytes;
  const auto pie2 = pie_infer(model, random_workload(9, 32, 1, 2, 10, 0, 1)).cross_kv_bytes;
  const auto pie8 = pie_infer(model, random_workload(9, 32, 1, 8, 10, 0, 1)).cross_kv_bytes;
  EXPECT_EQ(pid2, pid8);
  EXPECT_EQ(pie8, 4 * pie2);
  EXPECT_EQ(pie2, 2 * pid2);
}

TEST(EnginesTest, SharedKvReadsAreOneOverU) {
  Model model = Model::create(toy_config(), 10);
  for (std::size_t u : {2u, 4u, 7u}) {
    Workload wl = random_workload(10, 32, 2, u, 13, 0, 5, false);
    DecodeResult pie = pie_infer(model, wl), pid = pid_infer(model, wl);
    ASSERT_EQ(pie.steps_taken, pid.steps_taken);
    const auto pie_kv = pie.decode_counters.at(Component::decoder_cross).kv_bytes_read;
    const auto pid_kv = pid.decode_counters.at(Component::decoder_cross).kv_bytes_read;
    EXPECT_EQ(pie_kv, u * pid_kv);
  }
}

TEST(EnginesTest, MatchReferenceDecodingTwentySeeds) {
  for (std::uint64_t seed = 100; seed < 120; ++seed) {
    Model model = Model::create(toy_config(16, 2, 2, 32, 64), seed);
    Workload wl = random_workload(seed, 32, 1 + seed % 3, 1 + seed % 4, 5 + seed % 9, seed % 3,
                                  1 + seed % 16);
    for (EngineKind k : {EngineKind::pie, EngineKind::pid}) {
      DecodeResult cached = infer(k, model, wl, recording());
      DecodeResult ref = reference_decode(model, wl, k);
      EXPECT_EQ(cached.outputs, ref.outputs) << "seed " << seed << " " << to_string(k);
      EXPECT_LE(max_logit_diff(cached, ref), 1e-4f) << "seed " << seed;
    }
  }
}

TEST(EnginesTest, ZeroMaxTokensGivesEmptyOutputs) {
  Model model = Model::create(toy_config(), 11);
  Workload wl = random_workload(11, 32, 2, 3, 6, 1, 0);
  for (EngineKind k : {EngineKind::pie, EngineKind::pid}) {
    DecodeResult cached = infer(k, model, wl), ref = reference_decode(model, wl, k);
    for (const auto& inst : cached.outputs)
      for (const auto& y : inst) EXPECT_TRUE(y.empty());
    EXPECT_EQ(cached.outputs, ref.outputs);
    EXPECT_EQ(cached.steps_taken, 0u);
  }
}

TEST(EnginesTest, EarlyFinishingStreamsDoNotDisturbOthers) {
  bool saw_staggered = false;
  for (std::uint64_t seed = 0; seed < 40 && !saw_staggered; ++seed) {
    Model model = testing::sharpened_model(toy_config(), seed);
    Workload wl = random_workload(seed, 32, 2, 4, 9, 2, 10);
    DecodeResult pid = pid_infer(model, wl, recording());
    DecodeResult ref = reference_decode(model, wl, EngineKind::pid);
    ASSERT_EQ(pid.outputs, ref.outputs) << "seed " << seed;
    EXPECT_LE(max_logit_diff(pid, ref), 1e-4f);
    std::set<std::size_t> lengths;
    for (const auto& inst : pid.outputs) {
      for (const auto& y : inst) {
        lengths.insert(y.size());
        EXPECT_TRUE(y.back() == kEosToken || y.size() == 10);
        EXPECT_LE(std::count(y.begin(), y.end(), kEosToken), 1);
      }
    }
    if (lengths.size() >= 2 && *lengths.begin() < 10) {
      saw_staggered = true;
      EXPECT_GT(pid.wasted_slots, 0u);
    }
  }
  EXPECT_TRUE(saw_staggered);
}

TEST(EnginesTest, FinishedStreamCacheIsFrozen) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Model model = testing::sharpened_model(toy_config(), seed);
    Workload wl = random_workload(seed, 32, 1, 4, 9, 2, 10);
    DecodeResult r = pid_infer(model, wl);
    for (std::size_t u = 0; u < 4; ++u) {
      // Prefix (n_p + BOS) plus every generated token except the last one.
      EXPECT_EQ(r.stream_cache_lengths[u], 3 + r.outputs[0][u].size() - 1);
    }
  }
}

TEST(EnginesTest, PromptPermutationPermutesOutputs) {
  Model model = Model::create(toy_config(), 12);
  Workload wl = random_workload(12, 32, 2, 4, 10, 2, 7);
  Workload perm = wl;
  const std::vector<std::size_t> order{2, 0, 3, 1};
  for (std::size_t b = 0; b < wl.batch(); ++b)
    for (std::size_t i = 0; i < order.size(); ++i)
      perm.instances[b].prompts[i] = wl.instances[b].prompts[order[i]];
  for (EngineKind k : {EngineKind::pie, EngineKind::pid}) {
    DecodeResult a = infer(k, model, wl), p = infer(k, model, perm);
    for (std::size_t b = 0; b < wl.batch(); ++b)
      for (std::size_t i = 0; i < order.size(); ++i)
        EXPECT_EQ(p.outputs[b][i], a.outputs[b][order[i]]);
  }
}

TEST(EnginesTest, BatchPermutationPermutesOutputs) {
  Model model = Model::create(toy_config(), 13);
  Workload wl = random_workload(13, 32, 3, 2, 10, 2, 7);
  Workload perm = wl;
  std::swap(perm.instances[0], perm.instances[2]);
  for (EngineKind k : {EngineKind::pie, EngineKind::pid}) {
    DecodeResult a = infer(k, model, wl), p = infer(k, model, perm);
    EXPECT_EQ(p.outputs[0], a.outputs[2]);
    EXPECT_EQ(p.outputs[1], a.outputs[1]);
    EXPECT_EQ(p.outputs[2], a.outputs[0]);
  }
}

TEST(EnginesTest, DeterministicAcrossRunsAndThreads) {
  Model model = Model::create(toy_config(), 14);
  Workload wl = random_workload(14, 32, 2, 3, 10, 2, 6);
  DecodeResult first = pid_infer(model, wl);
  auto f1 = std::async(std::launch::async, [&] { return pid_infer(model, wl); });
  auto f2 = std::async(std::launch::async, [&] { return pid_infer(model, wl); });
  DecodeResult a = f1.get(), b = f2.get();
  EXPECT_EQ(a.outputs, first.outputs);
  EXPECT_EQ(b.outputs, first.outputs);
  EXPECT_EQ(a.counters(), first.counters());
}

TEST(EnginesTest, OverlengthWorkloadsAreLengthErrors) {
  Model model = Model::create(toy_config(16, 2, 1, 32, 20), 15);
  EXPECT_THROW(pie_infer(model, random_workload(1, 32, 1, 2, 18, 2, 2)), LengthError);
  EXPECT_NO_THROW(pid_infer(model, random_workload(1, 32, 1, 2, 18, 2, 2)));
  EXPECT_THROW(pid_infer(model, random_workload(1, 32, 1, 2, 10, 10, 12)), LengthError);
}

TEST(EnginesTest, InvalidWorkloadsAreRejected) {
  Model model = Model::create(toy_config(), 16);
  Workload empty;
  EXPECT_THROW(pid_infer(model, empty), UsageError);
  Workload ragged = random_workload(1, 32, 2, 2, 5, 1, 2);
  ragged.instances[1].prompts.pop_back();
  EXPECT_THROW(pie_infer(model, ragged), UsageError);
}

}  // namespace
}  // namespace encdec
