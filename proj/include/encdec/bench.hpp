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

#pragma once

// Wall-clock benchmarks of the two engines on synthetic instances of a given
// shape: single-instance latency and per-instance latency under batching.
// Timing uses std::chrono::steady_clock; warmup runs are discarded.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "encdec/engines.hpp"
#include "encdec/errors.hpp"
#include "encdec/flop_model.hpp"

namespace encdec {

// Thrown when a run would exceed the configured memory cap.
class ResourceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TimingStats {
  std::vector<double> samples;  // seconds
  double mean = 0.0;
  double stddev = 0.0;
  double median = 0.0;

  // Spread above half the mean marks a measurement as unreliable.
  bool unstable() const { return mean > 0.0 && stddev > 0.5 * mean; }
};

inline TimingStats summarize(std::vector<double> samples) {
  TimingStats t;
  t.samples = samples;
  if (samples.empty()) return t;
  double sum = 0;
  for (double s : samples) sum += s;
  t.mean = sum / static_cast<double>(samples.size());
  double var = 0;
  for (double s : samples) var += (s - t.mean) * (s - t.mean);
  t.stddev = samples.size() > 1 ? std::sqrt(var / static_cast<double>(samples.size() - 1)) : 0.0;
  std::sort(samples.begin(), samples.end());
  const std::size_t n = samples.size();
  t.median = n % 2 ? samples[n / 2] : 0.5 * (samples[n / 2 - 1] + samples[n / 2]);
  return t;
}

inline constexpr std::size_t kMinBenchReps = 3;

struct BenchConfig {
  ModelConfig model;
  std::size_t U = 16;
  std::size_t n_s = 128;
  std::size_t n_p = 2;
  std::size_t n_t = 8;
  std::vector<std::size_t> batch_sizes = {1, 2, 4};
  std::size_t reps = 3;
  std::size_t warmup = 1;
  std::uint64_t seed = 0;
  double max_memory_bytes = 1024.0 * 1024 * 1024;

  BenchConfig() {
    model.d_model = 64;
    model.n_heads = 4;
    model.n_enc_layers = 2;
    model.n_dec_layers = 2;
    model.d_ff = 128;
    model.vocab_size = 64;
    model.max_len = 512;
  }

  void validate() const {
    model.validate();
    if (reps < kMinBenchReps) {
      throw UsageError("repetitions must be >= " + std::to_string(kMinBenchReps) + " for timing");
    }
    if (U == 0 || n_s == 0 || n_t == 0) throw UsageError("bench needs U, n_s, n_t >= 1");
    if (batch_sizes.empty()) throw UsageError("bench needs at least one batch size");
    for (std::size_t b : batch_sizes) {
      if (b == 0) throw UsageError("batch sizes must be >= 1");
    }
  }

  std::size_t max_batch() const { return *std::max_element(batch_sizes.begin(), batch_sizes.end()); }
};

// Peak bytes of the larger engine at the largest batch: weights, cross K/V
// caches, self-attention caches, and one encoder pass of activations.
inline double estimate_bench_bytes(const BenchConfig& c) {
  const double d = static_cast<double>(c.model.d_model);
  const double f = static_cast<double>(c.model.d_ff);
  const double v = static_cast<double>(c.model.vocab_size);
  const double le = static_cast<double>(c.model.n_enc_layers);
  const double ld = static_cast<double>(c.model.n_dec_layers);
  const double b = static_cast<double>(c.max_batch());
  const double u = static_cast<double>(c.U);
  const double enc_len = static_cast<double>(c.n_s + c.n_p + 1);
  const double params = 2 * v * d + le * (4 * d * d + 2 * d * f) + ld * (8 * d * d + 2 * d * f);
  const double cross = b * u * enc_len * d * 2 * ld;
  const double self = b * u * static_cast<double>(c.n_p + c.n_t + 1) * d * 2 * ld;
  const double activations = enc_len * (4 * d + f) + enc_len * enc_len * 2;
  return 4.0 * (params + cross + self + activations);
}

inline Workload bench_workload(const BenchConfig& c, std::size_t batch, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<TokenId> dist(kFirstFreeToken, static_cast<TokenId>(c.model.vocab_size - 1));
  auto seq = [&](std::size_t n) {
    TokenSeq t(n);
    for (auto& x : t) x = dist(rng);
    return t;
  };
  Workload wl;
  wl.max_new_tokens = c.n_t;
  wl.stop_at_eos = false;
  for (std::size_t i = 0; i < batch; ++i) {
    Instance inst;
    inst.input = seq(c.n_s);
    for (std::size_t u = 0; u < c.U; ++u) inst.prompts.push_back(seq(c.n_p));
    wl.instances.push_back(std::move(inst));
  }
  return wl;
}

struct BatchTiming {
  std::size_t batch = 1;
  TimingStats run;             // whole batch
  double per_instance_s = 0.0; // median / batch
};

struct EngineBench {
  EngineKind kind = EngineKind::pie;
  TimingStats single;
  std::vector<BatchTiming> batched;
  std::size_t best_batch = 1;
  double best_per_instance_s = 0.0;
  CounterSet counters;  // one single-instance run
  std::vector<TokenSeq> outputs;  // single-instance decoded streams
  std::size_t repeat_mismatches = 0;  // timed runs whose tokens differ from the first
  bool unstable = false;
};

struct LatencyReport {
  BenchConfig config;
  EngineBench pie, pid;
  double single_speedup = 0.0;   // PiE / PiD single-instance median
  double batched_speedup = 0.0;  // PiE / PiD best per-instance time
  double measured_flop_ratio = 0.0;   // PiD / PiE counter totals
  double predicted_flop_ratio = 0.0;  // closed-form, same shape and model
  bool unstable() const { return pie.unstable || pid.unstable; }
};

namespace detail {

// Times PiE and PiD on one workload with their repetitions interleaved, so
// drift in host speed affects both engines alike. Every run's tokens are
// compared with the engine's first run; differences are added to
// `mismatches` (PiE, PiD).
inline std::pair<TimingStats, TimingStats> time_paired(const Model& model, const Workload& wl,
                                                       std::size_t reps, std::size_t warmup,
                                                       std::array<std::size_t, 2>* mismatches = nullptr) {
  std::array<std::optional<std::vector<std::vector<TokenSeq>>>, 2> first;
  auto once = [&](EngineKind k) {
    const auto t0 = std::chrono::steady_clock::now();
    DecodeResult r = infer(k, model, wl);
    const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const std::size_t i = k == EngineKind::pie ? 0 : 1;
    if (!first[i]) first[i] = std::move(r.outputs);
    else if (mismatches && *first[i] != r.outputs) ++(*mismatches)[i];
    return dt;
  };
  for (std::size_t i = 0; i < warmup; ++i) {
    once(EngineKind::pie);
    once(EngineKind::pid);
  }
  std::vector<double> pie, pid;
  for (std::size_t i = 0; i < reps; ++i) {
    pie.push_back(once(EngineKind::pie));
    pid.push_back(once(EngineKind::pid));
  }
  return {summarize(std::move(pie)), summarize(std::move(pid))};
}

inline void record_batch(EngineBench& e, std::size_t b, TimingStats t) {
  BatchTiming bt;
  bt.batch = b;
  bt.run = std::move(t);
  bt.per_instance_s = bt.run.median / static_cast<double>(b);
  e.unstable = e.unstable || bt.run.unstable();
  if (bt.per_instance_s < e.best_per_instance_s) {
    e.best_per_instance_s = bt.per_instance_s;
    e.best_batch = b;
  }
  e.batched.push_back(std::move(bt));
}

}  // namespace detail

inline LatencyReport run_bench(const BenchConfig& c) {
  c.validate();
  if (estimate_bench_bytes(c) > c.max_memory_bytes) {
    throw ResourceError("estimated memory " + std::to_string(static_cast<long long>(estimate_bench_bytes(c))) +
                        " bytes exceeds cap " + std::to_string(static_cast<long long>(c.max_memory_bytes)));
  }
  ModelConfig mc = c.model;
  mc.max_len = std::max(mc.max_len, std::max(c.n_s + c.n_p + 1, c.n_p + c.n_t + 1));
  const Model model = Model::create(mc, c.seed);
  LatencyReport rep;
  rep.config = c;
  rep.config.model = mc;
  rep.pie.kind = EngineKind::pie;
  rep.pid.kind = EngineKind::pid;
  const Workload single = bench_workload(rep.config, 1, c.seed);
  for (EngineBench* e : {&rep.pie, &rep.pid}) {
    const DecodeResult r = infer(e->kind, model, single);
    e->counters = r.counters();
    e->outputs = r.outputs.front();
    e->best_per_instance_s = INFINITY;
  }
  std::array<std::size_t, 2> mismatches{};
  std::tie(rep.pie.single, rep.pid.single) = detail::time_paired(model, single, c.reps, c.warmup, &mismatches);
  rep.pie.repeat_mismatches = mismatches[0];
  rep.pid.repeat_mismatches = mismatches[1];
  rep.pie.unstable = rep.pie.single.unstable();
  rep.pid.unstable = rep.pid.single.unstable();
  for (std::size_t b : c.batch_sizes) {
    const Workload wl = b == 1 ? single : bench_workload(rep.config, b, c.seed + b);
    auto [pie, pid] = detail::time_paired(model, wl, c.reps, c.warmup);
    detail::record_batch(rep.pie, b, std::move(pie));
    detail::record_batch(rep.pid, b, std::move(pid));
  }
  rep.single_speedup = rep.pie.single.median / rep.pid.single.median;
  rep.batched_speedup = rep.pie.best_per_instance_s / rep.pid.best_per_instance_s;
  rep.measured_flop_ratio = static_cast<double>(rep.pid.counters.total().flops) /
                            static_cast<double>(rep.pie.counters.total().flops);
  const InferenceShape s{1, c.U, c.n_s, c.n_t, c.n_p};
  rep.predicted_flop_ratio = static_cast<double>(predict_inference_total(mc, s, EngineKind::pid)) /
                             static_cast<double>(predict_inference_total(mc, s, EngineKind::pie));
  return rep;
}

}  // namespace encdec
