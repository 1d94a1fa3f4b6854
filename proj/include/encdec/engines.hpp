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

// The two multi-prompt inference configurations over one shared input X:
//
//   PiE  Y_u = decoder(encoder(X || SEP || Z_u))   one encoder pass per prompt
//   PiD  Y_u = decoder(encoder(X), Z_u)            one encoder pass per input;
//        the U prompt streams of an instance attend to one shared
//        cross-attention K/V entry as a single batched query block.
//
// Decoding is greedy and lockstep: every unfinished stream advances one token
// per step. A finished stream stays in its slot, is no longer computed, and
// its cache is left untouched; skipped slots are reported as wasted.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "encdec/config.hpp"
#include "encdec/counters.hpp"
#include "encdec/kv_cache.hpp"
#include "encdec/model.hpp"
#include "encdec/weights.hpp"

namespace encdec {

enum class EngineKind { pie, pid };

constexpr const char* to_string(EngineKind k) noexcept { return k == EngineKind::pie ? "pie" : "pid"; }

using TokenSeq = std::vector<TokenId>;

struct Instance {
  TokenSeq input;                 // X
  std::vector<TokenSeq> prompts;  // Z_1 .. Z_U
};

struct Workload {
  std::vector<Instance> instances;  // b instances with the same U
  std::size_t max_new_tokens = 24;
  bool stop_at_eos = true;

  std::size_t batch() const noexcept { return instances.size(); }
  std::size_t num_prompts() const noexcept {
    return instances.empty() ? 0 : instances.front().prompts.size();
  }
  std::size_t prompt_len() const noexcept {
    return num_prompts() == 0 ? 0 : instances.front().prompts.front().size();
  }

  void validate() const {
    if (instances.empty()) throw UsageError("workload has no instances");
    const std::size_t u = num_prompts();
    if (u == 0) throw UsageError("workload needs at least one prompt per instance");
    const std::size_t np = prompt_len();
    for (const auto& inst : instances) {
      if (inst.prompts.size() != u) throw UsageError("instances in a batch must share U");
      for (const auto& z : inst.prompts) {
        if (z.size() != np) throw UsageError("all prompts must have the same length");
      }
      if (inst.input.empty()) throw LengthError("workload input X is empty");
    }
  }
};

enum class CrossKvMode {
  shared,      // one entry per instance, broadcast to its U streams
  replicated,  // U explicit copies per instance (ablation)
};

struct EngineOptions {
  CrossKvMode cross_kv = CrossKvMode::shared;
  // Debug fault: perturbs every shared cross-attention entry after it is
  // built. Replicated copies are taken before the perturbation.
  bool corrupt_shared_kv = false;
  bool record_logits = false;
};

struct Model {
  ModelConfig config;
  WeightSet weights;

  static Model create(const ModelConfig& config, std::uint64_t seed) {
    return Model{config, init_weights(config, seed)};
  }
};

struct DecodeResult {
  // outputs[instance][prompt], each ending in EOS or capped at max_new_tokens.
  std::vector<std::vector<TokenSeq>> outputs;
  std::size_t steps_taken = 0;
  std::size_t encoder_passes = 0;
  std::size_t wasted_slots = 0;
  std::size_t cross_kv_bytes = 0;
  CounterSet encode_counters;
  CounterSet decode_counters;
  // One matrix per stream (instance-major), one row per generated token.
  std::vector<Matrix> stream_logits;
  // Final self-attention cache length of every stream.
  std::vector<std::size_t> stream_cache_lengths;

  CounterSet counters() const { return merged(encode_counters, decode_counters); }
};

// Argmax; ties go to the lowest token id.
inline TokenId argmax_token(std::span<const float> logits) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < logits.size(); ++i) {
    if (logits[i] > logits[best]) best = i;
  }
  return static_cast<TokenId>(best);
}

// Next token for each row of `logits` (one row per active stream).
inline std::vector<TokenId> greedy_decode(const Matrix& logits) {
  std::vector<TokenId> next;
  next.reserve(logits.rows());
  for (std::size_t r = 0; r < logits.rows(); ++r) next.push_back(argmax_token(logits.row(r)));
  return next;
}

inline TokenSeq pie_encoder_input(const Instance& inst, std::size_t u) {
  TokenSeq seq = inst.input;
  if (!inst.prompts[u].empty()) {
    seq.push_back(kSepToken);
    seq.insert(seq.end(), inst.prompts[u].begin(), inst.prompts[u].end());
  }
  return seq;
}

// PiD decoder prefix: prompt at positions 0..n_p-1, BOS at n_p.
inline TokenSeq pid_decoder_prefix(const Instance& inst, std::size_t u) {
  TokenSeq seq = inst.prompts[u];
  seq.push_back(kBosToken);
  return seq;
}

inline TokenSeq decoder_prefix(EngineKind kind, const Instance& inst, std::size_t u) {
  return kind == EngineKind::pie ? TokenSeq{kBosToken} : pid_decoder_prefix(inst, u);
}

inline TokenSeq encoder_input(EngineKind kind, const Instance& inst, std::size_t u) {
  return kind == EngineKind::pie ? pie_encoder_input(inst, u) : inst.input;
}

namespace detail {

inline void check_workload_lengths(const ModelConfig& config, const Workload& wl, EngineKind kind) {
  wl.validate();
  for (const auto& inst : wl.instances) {
    const std::size_t enc = encoder_input(kind, inst, 0).size();
    if (enc > config.max_len) {
      throw LengthError("encoder input of length " + std::to_string(enc) + " exceeds max_len " +
                        std::to_string(config.max_len));
    }
  }
  const std::size_t prefix = kind == EngineKind::pie ? 0 : wl.prompt_len();
  if (prefix + std::max<std::size_t>(wl.max_new_tokens, 1) > config.max_len) {
    throw LengthError("decoder needs " + std::to_string(prefix + wl.max_new_tokens) +
                      " positions, max_len is " + std::to_string(config.max_len));
  }
}

inline void perturb(CrossKv<float>& kv) {
  for (auto& layer : kv.layers) {
    for (float& x : layer.k.data()) x += 0.5f;
    for (float& x : layer.v.data()) x -= 0.5f;
  }
}

// Lockstep greedy decoding of every stream in `state`, starting from the
// given prefixes (all the same length).
inline void run_lockstep(const Model& model, KVCacheSet& state,
                         const std::vector<TokenSeq>& prefixes, const Workload& wl,
                         const EngineOptions& opts, DecodeResult& result) {
  const std::size_t n_streams = prefixes.size();
  const std::size_t u = wl.num_prompts();
  std::vector<TokenSeq> generated(n_streams);
  if (opts.record_logits) result.stream_logits.assign(n_streams, Matrix(0, model.config.vocab_size));

  std::vector<std::size_t> active(n_streams);
  for (std::size_t s = 0; s < n_streams; ++s) active[s] = s;
  std::vector<TokenId> block;
  for (const auto& p : prefixes) block.insert(block.end(), p.begin(), p.end());
  std::size_t block_len = n_streams == 0 ? 0 : prefixes.front().size();

  while (wl.max_new_tokens > 0 && !active.empty()) {
    Matrix logits = decoder_step(model.config, model.weights, state, active, block, block_len,
                                 result.decode_counters);
    if (!all_finite(logits)) {
      throw std::runtime_error("non-finite logits at step " + std::to_string(result.steps_taken));
    }
    ++result.steps_taken;
    result.wasted_slots += n_streams - active.size();
    const std::vector<TokenId> next = greedy_decode(logits);
    std::vector<std::size_t> still;
    block.clear();
    for (std::size_t i = 0; i < active.size(); ++i) {
      const std::size_t s = active[i];
      generated[s].push_back(next[i]);
      if (opts.record_logits) result.stream_logits[s].append_row(logits.row(i));
      const bool done = (wl.stop_at_eos && next[i] == kEosToken) ||
                        generated[s].size() >= wl.max_new_tokens;
      if (!done) {
        still.push_back(s);
        block.push_back(next[i]);
      }
    }
    active = std::move(still);
    block_len = 1;
  }

  result.outputs.assign(wl.batch(), std::vector<TokenSeq>(u));
  for (std::size_t s = 0; s < n_streams; ++s) {
    result.outputs[s / u][s % u] = std::move(generated[s]);
    result.stream_cache_lengths.push_back(state.self[s].length);
  }
}

}  // namespace detail

inline DecodeResult pie_infer(const Model& model, const Workload& wl,
                              const EngineOptions& opts = {}) {
  detail::check_workload_lengths(model.config, wl, EngineKind::pie);
  DecodeResult result;
  KVCacheSet state;
  std::vector<TokenSeq> prefixes;
  const std::size_t n_layers = model.config.n_dec_layers;
  for (const auto& inst : wl.instances) {
    for (std::size_t u = 0; u < inst.prompts.size(); ++u) {
      Matrix m = encoder_forward(model.config, model.weights,
                                 std::span<const TokenId>(pie_encoder_input(inst, u)),
                                 result.encode_counters);
      ++result.encoder_passes;
      state.cross.push_back(project_cross_kv(model.config, model.weights, m, result.encode_counters));
      state.add_stream(n_layers, state.cross.size() - 1);
      prefixes.push_back(TokenSeq{kBosToken});
    }
  }
  result.cross_kv_bytes = state.cross_bytes();
  detail::run_lockstep(model, state, prefixes, wl, opts, result);
  return result;
}

inline DecodeResult pid_infer(const Model& model, const Workload& wl,
                              const EngineOptions& opts = {}) {
  detail::check_workload_lengths(model.config, wl, EngineKind::pid);
  DecodeResult result;
  KVCacheSet state;
  std::vector<TokenSeq> prefixes;
  const std::size_t n_layers = model.config.n_dec_layers;
  for (const auto& inst : wl.instances) {
    Matrix m = encoder_forward(model.config, model.weights, std::span<const TokenId>(inst.input),
                               result.encode_counters);
    ++result.encoder_passes;
    CrossKv<float> kv = project_cross_kv(model.config, model.weights, m, result.encode_counters);
    if (opts.cross_kv == CrossKvMode::replicated) {
      for (std::size_t u = 0; u < inst.prompts.size(); ++u) {
        state.cross.push_back(kv);
        state.add_stream(n_layers, state.cross.size() - 1);
      }
    } else {
      if (opts.corrupt_shared_kv) detail::perturb(kv);
      state.cross.push_back(std::move(kv));
      for (std::size_t u = 0; u < inst.prompts.size(); ++u) {
        state.add_stream(n_layers, state.cross.size() - 1);
      }
    }
    for (std::size_t u = 0; u < inst.prompts.size(); ++u) {
      prefixes.push_back(pid_decoder_prefix(inst, u));
    }
  }
  result.cross_kv_bytes = state.cross_bytes();
  detail::run_lockstep(model, state, prefixes, wl, opts, result);
  return result;
}

inline DecodeResult infer(EngineKind kind, const Model& model, const Workload& wl,
                          const EngineOptions& opts = {}) {
  return kind == EngineKind::pie ? pie_infer(model, wl, opts) : pid_infer(model, wl, opts);
}

// Oracle: decodes every stream on its own, recomputing the cross K/V
// projections and the whole decoder sequence at every step (no caches).
// Produces the same layout as the cached engines; logits are always recorded.
inline DecodeResult reference_decode(const Model& model, const Workload& wl, EngineKind kind) {
  detail::check_workload_lengths(model.config, wl, kind);
  DecodeResult result;
  const std::size_t u_count = wl.num_prompts();
  result.outputs.assign(wl.batch(), std::vector<TokenSeq>(u_count));
  for (std::size_t b = 0; b < wl.batch(); ++b) {
    const Instance& inst = wl.instances[b];
    Matrix shared_m;
    if (kind == EngineKind::pid) {
      shared_m = encoder_forward(model.config, model.weights, std::span<const TokenId>(inst.input),
                                 result.encode_counters);
      ++result.encoder_passes;
    }
    for (std::size_t u = 0; u < u_count; ++u) {
      Matrix m = shared_m;
      if (kind == EngineKind::pie) {
        m = encoder_forward(model.config, model.weights,
                            std::span<const TokenId>(pie_encoder_input(inst, u)),
                            result.encode_counters);
        ++result.encoder_passes;
      }
      TokenSeq seq = decoder_prefix(kind, inst, u);
      TokenSeq& out = result.outputs[b][u];
      Matrix logits_trace(0, model.config.vocab_size);
      while (out.size() < wl.max_new_tokens) {
        CrossKv<float> kv = project_cross_kv(model.config, model.weights, m, result.decode_counters);
        Matrix all = decoder_forward_full(model.config, model.weights, kv,
                                          std::span<const TokenId>(seq), result.decode_counters);
        auto last = all.row(all.rows() - 1);
        logits_trace.append_row(last);
        const TokenId next = argmax_token(last);
        out.push_back(next);
        seq.push_back(next);
        if (wl.stop_at_eos && next == kEosToken) break;
      }
      result.steps_taken = std::max(result.steps_taken, out.size());
      result.stream_logits.push_back(std::move(logits_trace));
    }
  }
  return result;
}

}  // namespace encdec
