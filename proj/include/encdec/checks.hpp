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

// Deterministic verification checks shared by `encdec verify` and the
// acceptance runner. Every check is a pure function of its seed: results,
// including the metric values, are reproducible bit for bit.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <future>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "encdec/costmodel.hpp"
#include "encdec/engines.hpp"
#include "encdec/flop_model.hpp"
#include "encdec/instrumentation.hpp"
#include "encdec/presets.hpp"
#include "encdec/synthetic.hpp"
#include "encdec/training.hpp"

namespace encdec {

struct CheckResult {
  std::string id;
  std::string name;
  bool passed = false;
  std::string detail;
  std::vector<std::pair<std::string, double>> metrics;

  void metric(std::string key, double value) { metrics.emplace_back(std::move(key), value); }
};

inline std::string format_double(double v, int precision = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", precision, v);
  return buf;
}

namespace checks {

inline TokenSeq random_seq(std::size_t n, std::size_t vocab, std::mt19937_64& rng) {
  std::uniform_int_distribution<TokenId> dist(kFirstFreeToken, static_cast<TokenId>(vocab - 1));
  TokenSeq t(n);
  for (auto& x : t) x = dist(rng);
  return t;
}

inline Workload random_workload(std::mt19937_64& rng, std::size_t vocab, std::size_t b, std::size_t u,
                                std::size_t n_s, std::size_t n_p, std::size_t max_new,
                                bool stop_at_eos = true) {
  Workload wl;
  wl.max_new_tokens = max_new;
  wl.stop_at_eos = stop_at_eos;
  for (std::size_t i = 0; i < b; ++i) {
    Instance inst;
    inst.input = random_seq(n_s, vocab, rng);
    for (std::size_t p = 0; p < u; ++p) inst.prompts.push_back(random_seq(n_p, vocab, rng));
    wl.instances.push_back(std::move(inst));
  }
  return wl;
}

// Random weights scaled up so decoded tokens depend on the input.
inline Model sharpened(const ModelConfig& config, std::uint64_t seed, float factor) {
  Model m = Model::create(config, seed);
  scale_for_training(m, factor, factor);
  return m;
}

inline float max_logit_diff(const DecodeResult& a, const DecodeResult& b) {
  if (a.stream_logits.size() != b.stream_logits.size()) return INFINITY;
  float m = 0;
  for (std::size_t s = 0; s < a.stream_logits.size(); ++s) {
    const Matrix& x = a.stream_logits[s];
    const Matrix& y = b.stream_logits[s];
    if (x.rows() != y.rows() || x.cols() != y.cols()) return INFINITY;
    for (std::size_t i = 0; i < x.size(); ++i) m = std::max(m, std::abs(x.data()[i] - y.data()[i]));
  }
  return m;
}

// Model and workload drawn for one seed of a randomized check: d up to 64,
// h up to 4, up to 2+2 layers, U up to 8, b up to 4, n_s up to 64.
struct RandomCase {
  Model model;
  Workload workload;
};

inline RandomCase random_case(std::uint64_t seed, std::size_t max_new) {
  std::mt19937_64 rng(seed);
  const std::size_t heads = std::size_t{1} << (rng() % 3);
  const std::size_t d = heads * 16 * (1 + rng() % (heads == 4 ? 1 : 2));
  ModelConfig c;
  c.d_model = d;
  c.n_heads = heads;
  c.n_enc_layers = 1 + rng() % 2;
  c.n_dec_layers = 1 + rng() % 2;
  c.d_ff = 2 * d;
  c.vocab_size = 48;
  c.max_len = 96;
  const float factor = (seed % 2 == 0) ? 1.0f : 8.0f;
  RandomCase rc{sharpened(c, seed, factor), {}};
  const std::size_t U = 1 + rng() % 8, b = 1 + rng() % 4, n_s = 1 + rng() % 64, n_p = rng() % 4;
  rc.workload = random_workload(rng, c.vocab_size, b, U, n_s, n_p, max_new);
  return rc;
}

}  // namespace checks

// Shared cross-attention K/V against U explicit copies.
inline CheckResult check_broadcast_equivalence(std::uint64_t seed, std::size_t seeds = 20,
                                               bool corrupt_shared_kv = false) {
  CheckResult r{"broadcast_equivalence", "shared cross-attention K/V equals explicit copies", true, "", {}};
  float worst = 0;
  std::size_t token_mismatches = 0;
  for (std::size_t i = 0; i < seeds; ++i) {
    const checks::RandomCase rc = checks::random_case(seed * 7919 + i, 6);
    EngineOptions shared;
    shared.record_logits = true;
    shared.corrupt_shared_kv = corrupt_shared_kv;
    EngineOptions copies = shared;
    copies.cross_kv = CrossKvMode::replicated;
    copies.corrupt_shared_kv = false;
    const DecodeResult a = pid_infer(rc.model, rc.workload, shared);
    const DecodeResult b = pid_infer(rc.model, rc.workload, copies);
    worst = std::max(worst, checks::max_logit_diff(a, b));
    token_mismatches += a.outputs != b.outputs;
  }
  r.passed = worst <= 1e-6f && token_mismatches == 0;
  r.metric("seeds", static_cast<double>(seeds));
  r.metric("max_abs_logit_diff", worst);
  r.metric("token_mismatch_seeds", static_cast<double>(token_mismatches));
  r.detail = "max |dlogit| " + format_double(worst) + " (limit 1e-06), token mismatches in " +
             std::to_string(token_mismatches) + "/" + std::to_string(seeds) + " seeds" +
             (corrupt_shared_kv ? " [fault injected]" : "");
  return r;
}

// Measured encoder flops PiE/PiD against U and U (n_s + n_p) / n_s.
inline CheckResult check_encoder_count_law(std::uint64_t seed) {
  CheckResult r{"encoder_count_law", "encoder flops ratio follows prompt count", true, "", {}};
  ModelConfig c;
  c.d_model = 32;
  c.n_heads = 4;
  c.n_enc_layers = 2;
  c.n_dec_layers = 1;
  c.d_ff = 64;
  c.vocab_size = 48;
  c.max_len = 96;
  const Model model = Model::create(c, seed);
  const std::size_t n_s = 64, n_p = 2;
  double worst = 0;
  std::string detail;
  for (std::size_t U : {2, 8, 30}) {
    for (std::size_t np : {std::size_t{0}, n_p}) {
      std::mt19937_64 rng(seed + U * 31 + np);
      const Workload wl = checks::random_workload(rng, c.vocab_size, 1, U, n_s, np, 1, false);
      const double pie = static_cast<double>(pie_infer(model, wl).encode_counters.total().flops);
      const double pid = static_cast<double>(pid_infer(model, wl).encode_counters.total().flops);
      const double ratio = pie / pid;
      const std::string key = "U" + std::to_string(U) + "_np" + std::to_string(np);
      r.metric(key + "_ratio", ratio);
      if (np == 0) {
        const bool exact = pie == static_cast<double>(U) * pid;
        r.passed = r.passed && exact;
        detail += key + " " + format_double(ratio) + (exact ? " exact" : " NOT exact") + "; ";
      } else {
        const double target = static_cast<double>(U * (n_s + np)) / static_cast<double>(n_s);
        const double dev = std::abs(ratio - target) / target;
        worst = std::max(worst, dev);
        r.passed = r.passed && dev <= 0.05;
        detail += key + " " + format_double(ratio) + " vs " + format_double(target) + "; ";
      }
    }
  }
  r.metric("max_prompt_deviation", worst);
  r.detail = detail + "max deviation " + format_double(worst) + " (limit 0.05)";
  return r;
}

// All seven inverse-intensity formulas: hand-substituted values and
// agreement with the count ratios at d = 4096.
inline CheckResult check_intensity_formulas() {
  CheckResult r{"intensity_formulas", "inverse-intensity formulas and count ratios", true, "", {}};
  struct Case {
    ShapeParams s;
    AttentionPart part;
    EngineKind cfg;
    double expected;
  };
  const ShapeParams a{1, 2, 256, 1, 0, 512, 1};
  const ShapeParams b{4, 2, 256, 64, 8, 512, 1};
  const std::vector<Case> hand = {
      {a, AttentionPart::enc_self, EngineKind::pid, 1.0 / 512 + 1.0 / 512},
      {b, AttentionPart::dec_self, EngineKind::pie, 64.0 / 512 + 1.0 / 8},
      {b, AttentionPart::dec_cross, EngineKind::pie, 265.0 / 512 + 0.125},
      {b, AttentionPart::dec_cross_output, EngineKind::pid, 65.0 / 512 + 0.125},
      {b, AttentionPart::enc_self, EngineKind::pie, 1.0 / 512 + 1.0 / (8.0 * 264)},
      {b, AttentionPart::dec_self_prompt, EngineKind::pid, 1.0 / 512 + 1.0 / 64},
      {b, AttentionPart::dec_cross_prompt, EngineKind::pid, (1.0 / 512) * (256.0 / 32 + 1) + 1.0 / 64},
  };
  double worst_hand = 0;
  for (const Case& c : hand) {
    const double v = inverse_intensity(c.s, c.part, c.cfg);
    worst_hand = std::max(worst_hand, std::abs(v - c.expected) / c.expected);
  }
  double worst_large = 0;
  std::mt19937_64 rng(4096);
  std::uniform_int_distribution<std::uint64_t> pick(1, 64);
  for (int t = 0; t < 100; ++t) {
    const ShapeParams s{pick(rng), pick(rng), 16 * pick(rng), pick(rng), pick(rng), 4096, 32};
    for (const Case& c : hand) {
      const double v = inverse_intensity(s, c.part, c.cfg);
      worst_large = std::max(worst_large, std::abs(v - count_ratio(s, c.part, c.cfg)) / v);
    }
  }
  r.passed = worst_hand <= 4 * std::numeric_limits<double>::epsilon() && worst_large <= 0.02;
  r.metric("hand_max_rel_error", worst_hand);
  r.metric("d4096_max_rel_gap", worst_large);
  r.detail = "7 formulas, hand values max rel error " + format_double(worst_hand) +
             ", count-ratio gap at d=4096 " + format_double(worst_large) + " (limit 0.02)";
  return r;
}

// Whole-model flop_ratio of every preset with an acceptance band.
inline CheckResult check_preset_flop_ratios() {
  CheckResult r{"preset_flop_ratios", "PiD/PiE flop ratio of dataset presets", true, "", {}};
  for (const Preset& p : presets()) {
    if (p.accept_low <= 0.0 && p.accept_high >= 1.0) continue;
    const double ratio = flop_ratio(p.shape, t5_base_config());
    const bool ok = ratio >= p.accept_low && ratio <= p.accept_high;
    r.passed = r.passed && ok;
    r.metric(p.name, ratio);
    r.detail += p.name + " " + format_double(ratio, 4) + " in [" + format_double(p.accept_low) + ", " +
                format_double(p.accept_high) + "]" + (ok ? "" : " FAIL") + "; ";
  }
  if (!r.detail.empty()) r.detail.resize(r.detail.size() - 2);
  return r;
}

// Cached engines against the uncached full-reforward oracle.
inline CheckResult check_incremental_decoding(std::uint64_t seed, std::size_t seeds = 20) {
  CheckResult r{"incremental_decoding", "cached decoding equals full re-forward", true, "", {}};
  float worst = 0;
  std::size_t mismatches = 0;
  for (std::size_t i = 0; i < seeds; ++i) {
    checks::RandomCase rc = checks::random_case(seed * 104729 + i, 8);
    // The oracle is quadratic per stream; keep the draw small.
    rc.workload.instances.resize(std::min<std::size_t>(rc.workload.instances.size(), 2));
    for (auto& inst : rc.workload.instances) {
      inst.prompts.resize(std::min<std::size_t>(inst.prompts.size(), 4));
    }
    EngineOptions opts;
    opts.record_logits = true;
    for (EngineKind k : {EngineKind::pie, EngineKind::pid}) {
      const DecodeResult cached = infer(k, rc.model, rc.workload, opts);
      const DecodeResult ref = reference_decode(rc.model, rc.workload, k);
      worst = std::max(worst, checks::max_logit_diff(cached, ref));
      mismatches += cached.outputs != ref.outputs;
    }
  }
  r.passed = worst <= 1e-4f && mismatches == 0;
  r.metric("seeds", static_cast<double>(seeds));
  r.metric("max_abs_logit_drift", worst);
  r.metric("token_mismatch_runs", static_cast<double>(mismatches));
  r.detail = "max logit drift " + format_double(worst) + " (limit 1e-04), token mismatches " +
             std::to_string(mismatches) + "/" + std::to_string(2 * seeds) + " runs";
  return r;
}

// Cost-table operation counts against instrumented attention flops.
struct DeviationCheck {
  CheckResult result;
  std::vector<DeviationReport> reports;
};

inline DeviationCheck check_cost_model_deviation(std::uint64_t seed) {
  DeviationCheck out;
  CheckResult& r = out.result;
  r = {"cost_model_deviation", "cost-table attention operations vs measured flops", true, "", {}};
  ModelConfig c;
  c.d_model = 128;
  c.n_heads = 4;
  c.n_enc_layers = 2;
  c.n_dec_layers = 2;
  c.d_ff = 256;
  c.vocab_size = 64;
  c.max_len = 288;
  const Model model = Model::create(c, seed);
  const ShapeParams s{8, 1, 256, 16, 0, 128, 4};
  std::mt19937_64 rng(seed);
  const Workload wl = checks::random_workload(rng, c.vocab_size, 1, 8, 256, 0, 16, false);
  for (EngineKind kind : {EngineKind::pie, EngineKind::pid}) {
    MeasuredRun m;
    m.shape = s;
    m.config = kind;
    m.enc_layers = c.n_enc_layers;
    m.dec_layers = c.n_dec_layers;
    m.counters = infer(kind, model, wl).counters();
    const DeviationReport rep = compare(table1_counts(s, kind), m, 0.15);
    for (const auto& row : rep.rows) {
      const std::string key = std::string(to_string(kind)) + "_" + row.component;
      r.metric(key + "_deviation", row.deviation);
      r.detail += key + " " + (row.missing ? std::string("missing") : format_double(row.deviation, 3)) + "; ";
    }
    r.passed = r.passed && rep.passed();
    out.reports.push_back(rep);
  }
  r.detail += "limit 0.15";
  return out;
}

inline CheckResult check_gradient(std::uint64_t seed) {
  CheckResult r{"gradient_check", "backward pass vs central finite differences (d=8)", true, "", {}};
  ModelConfig c;
  c.d_model = 8;
  c.n_heads = 2;
  c.n_enc_layers = 1;
  c.n_dec_layers = 1;
  c.d_ff = 16;
  c.vocab_size = 16;
  c.max_len = 32;
  const SyntheticTask t = make_synthetic_task(seed, 2, 6, c.vocab_size, 4);
  double worst = 0;
  std::size_t checked = 0;
  for (EngineKind kind : {EngineKind::pie, EngineKind::pid}) {
    const GradientCheckResult g = gradient_check(c, seed, t.train.front(), kind, 3);
    worst = std::max(worst, g.max_relative_error);
    checked += g.checked;
  }
  r.passed = worst <= 1e-3;
  r.metric("entries_checked", static_cast<double>(checked));
  r.metric("max_relative_error", worst);
  r.detail = std::to_string(checked) + " entries, max relative error " + format_double(worst) + " (limit 1e-03)";
  return r;
}

// Measured PiE/PiD training flops over one epoch against the analytic
// prediction for the same shape.
inline CheckResult check_training_flop_ratio(std::uint64_t seed, std::size_t instances,
                                             const std::vector<double>* measured_epochs = nullptr) {
  CheckResult r{"training_flop_ratio", "PiE/PiD per-epoch training flops vs prediction", true, "", {}};
  const ToyTrainingSetup setup;
  double pie = 0, pid = 0;
  if (measured_epochs) {
    pie = (*measured_epochs)[0];
    pid = (*measured_epochs)[1];
  } else {
    const SyntheticTask task = make_synthetic_task(seed, setup.num_prompts, setup.input_len(),
                                                   setup.config.vocab_size, instances);
    TrainOptions o;
    o.epochs = 1;
    o.seed = seed;
    for (EngineKind kind : {EngineKind::pie, EngineKind::pid}) {
      Model m = make_training_model(setup, seed);
      const TrainReport rep = train(m, task, kind, o);
      (kind == EngineKind::pie ? pie : pid) = static_cast<double>(rep.epochs[0].counters.total().flops);
    }
  }
  const InferenceShape s{1, setup.num_prompts, setup.input_len(), setup.value_len + 1, 1};
  const double predicted = predict_training_step_flops(setup.config, s, EngineKind::pie) /
                           predict_training_step_flops(setup.config, s, EngineKind::pid);
  const double measured = pie / pid;
  const double dev = std::abs(measured - predicted) / predicted;
  r.passed = pid < pie && dev <= 0.25;
  r.metric("measured_ratio", measured);
  r.metric("predicted_ratio", predicted);
  r.metric("relative_deviation", dev);
  r.detail = "measured " + format_double(measured, 4) + " vs predicted " + format_double(predicted, 4) +
             ", deviation " + format_double(dev, 3) + " (limit 0.25)";
  return r;
}

struct VerifyOptions {
  std::uint64_t seed = 0;
  bool corrupt_shared_kv = false;
  std::size_t training_instances = 200;
};

// The deterministic suite run by `encdec verify`, in a fixed order. Checks
// share no state, so `parallel` runs them concurrently with isolated
// counters and yields the same results.
inline std::vector<std::function<CheckResult()>> verify_checks(const VerifyOptions& o) {
  return {
      [o] { return check_broadcast_equivalence(o.seed, 20, o.corrupt_shared_kv); },
      [o] { return check_encoder_count_law(o.seed); },
      [] { return check_intensity_formulas(); },
      [] { return check_preset_flop_ratios(); },
      [o] { return check_incremental_decoding(o.seed); },
      [o] { return check_cost_model_deviation(o.seed).result; },
      [o] { return check_gradient(o.seed); },
      [o] { return check_training_flop_ratio(o.seed, o.training_instances); },
  };
}

inline std::vector<CheckResult> run_verify_suite(const VerifyOptions& o, bool parallel = false) {
  std::vector<CheckResult> out;
  const auto fns = verify_checks(o);
  if (!parallel) {
    for (const auto& f : fns) out.push_back(f());
    return out;
  }
  std::vector<std::future<CheckResult>> pending;
  for (const auto& f : fns) pending.push_back(std::async(std::launch::async, f));
  for (auto& p : pending) out.push_back(p.get());
  return out;
}

}  // namespace encdec
