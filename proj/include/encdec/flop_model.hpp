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

// Closed-form flop counts of whole-model inference and teacher-forced
// training, mirroring the kernel sequence the engines execute. Unlike the
// attention-only cost table these include the feed-forward blocks, the
// embedding and output projection, layer norms and the attention-score work,
// so they agree with the instrumented counters exactly.

#include <cstdint>

#include "encdec/config.hpp"
#include "encdec/costmodel.hpp"
#include "encdec/counters.hpp"
#include "encdec/engines.hpp"
#include "encdec/kernels.hpp"

namespace encdec {

namespace flops {

struct Dims {
  std::uint64_t d, f, vocab, heads, enc_layers, dec_layers;

  explicit Dims(const ModelConfig& c)
      : d(c.d_model), f(c.d_ff), vocab(c.vocab_size), heads(c.n_heads),
        enc_layers(c.n_enc_layers), dec_layers(c.n_dec_layers) {}
};

constexpr std::uint64_t matmul(std::uint64_t m, std::uint64_t k, std::uint64_t n) {
  return 2 * m * k * n;
}

// n query rows against m keys, all heads: QK^T, scaling, softmax and PV.
constexpr std::uint64_t attention_context(const Dims& x, std::uint64_t n, std::uint64_t m) {
  return 2 * matmul(n, x.d, m) + x.heads * n * m * (1 + kSoftmaxFlopsPerElement);
}

constexpr std::uint64_t layer_norm(const Dims& x, std::uint64_t rows) {
  return kLayerNormFlopsPerElement * rows * x.d;
}

// Pre-LN residual sublayer wrapping, for rows r: LN + residual add.
constexpr std::uint64_t residual(const Dims& x, std::uint64_t rows) {
  return layer_norm(x, rows) + rows * x.d;
}

constexpr std::uint64_t feed_forward(const Dims& x, std::uint64_t rows) {
  return residual(x, rows) + matmul(rows, x.d, x.f) + rows * x.f + matmul(rows, x.f, x.d);
}

// Self-attention sublayer of r rows (Q, K, V, O projections plus residual),
// excluding the attention context itself.
constexpr std::uint64_t self_projections(const Dims& x, std::uint64_t rows) {
  return residual(x, rows) + 4 * matmul(rows, x.d, x.d);
}

// Cross-attention sublayer of r query rows excluding the K/V projections of
// the encoder output and the attention context.
constexpr std::uint64_t cross_projections(const Dims& x, std::uint64_t rows) {
  return residual(x, rows) + 2 * matmul(rows, x.d, x.d);
}

}  // namespace flops

// One encoder pass over `len` tokens, including the final layer norm.
inline void add_encoder_pass(const ModelConfig& config, std::uint64_t len, CounterSet& out) {
  const flops::Dims x(config);
  out.at(Component::embedding).flops += len * x.d;
  out.at(Component::encoder_self).flops +=
      x.enc_layers * (flops::self_projections(x, len) + flops::attention_context(x, len, len));
  out.at(Component::feed_forward).flops += x.enc_layers * flops::feed_forward(x, len);
  out.at(Component::encoder_self).flops += flops::layer_norm(x, len);
}

inline void add_cross_projection(const ModelConfig& config, std::uint64_t len, CounterSet& out) {
  const flops::Dims x(config);
  out.at(Component::decoder_cross).flops += x.dec_layers * 2 * flops::matmul(len, x.d, x.d);
}

// Shape of a fixed-length inference run: every stream generates exactly n_t
// tokens. `pie_encoder_len` and `pid_prefix_len` follow the engines' input
// layouts.
struct InferenceShape {
  std::uint64_t b = 1;
  std::uint64_t U = 1;
  std::uint64_t n_s = 1;
  std::uint64_t n_t = 1;
  std::uint64_t n_p = 0;

  std::uint64_t pie_encoder_len() const { return n_s + (n_p > 0 ? n_p + 1 : 0); }
  std::uint64_t encoder_len(EngineKind k) const { return k == EngineKind::pie ? pie_encoder_len() : n_s; }
  std::uint64_t prefix_len(EngineKind k) const { return k == EngineKind::pie ? 1 : n_p + 1; }

  static InferenceShape from(const ShapeParams& s) { return {s.b, s.U, s.n_s, s.n_t, s.n_p}; }
};

// Predicted per-component flops of pie_infer / pid_infer with
// stop_at_eos = false and max_new_tokens = n_t. Bytes are not predicted.
inline CounterSet predict_inference_flops(const ModelConfig& config, const InferenceShape& s,
                                          EngineKind kind) {
  const flops::Dims x(config);
  CounterSet out;
  const std::uint64_t passes = kind == EngineKind::pie ? s.b * s.U : s.b;
  const std::uint64_t enc_len = s.encoder_len(kind);
  for (std::uint64_t i = 0; i < passes; ++i) {
    add_encoder_pass(config, enc_len, out);
    add_cross_projection(config, enc_len, out);
  }
  const std::uint64_t streams = s.b * s.U;
  const std::uint64_t k0 = s.prefix_len(kind);
  for (std::uint64_t step = 0; step < s.n_t; ++step) {
    const std::uint64_t block = step == 0 ? k0 : 1;
    const std::uint64_t cached = step == 0 ? 0 : k0 + step - 1;
    const std::uint64_t rows = streams * block;
    out.at(Component::embedding).flops += rows * x.d + flops::matmul(streams, x.d, x.vocab);
    out.at(Component::embedding).flops += flops::layer_norm(x, streams);
    out.at(Component::decoder_self).flops +=
        x.dec_layers * (flops::self_projections(x, rows) +
                        streams * flops::attention_context(x, block, cached + block));
    // Grouped or not, the score work is the same: every query row attends
    // the full encoder output once.
    out.at(Component::decoder_cross).flops +=
        x.dec_layers * (flops::cross_projections(x, rows) +
                        streams * flops::attention_context(x, block, enc_len));
    out.at(Component::feed_forward).flops += x.dec_layers * flops::feed_forward(x, rows);
  }
  return out;
}

inline std::uint64_t predict_inference_total(const ModelConfig& config, const InferenceShape& s,
                                             EngineKind kind) {
  return predict_inference_flops(config, s, kind).total().flops;
}

// Whole-model PiD/PiE inference flop ratio. The hidden size and head count
// come from the shape; depth, d_ff and vocabulary from `model`.
inline double flop_ratio(const ShapeParams& shape, const ModelConfig& model) {
  shape.validate();
  ModelConfig c = model;
  c.d_model = shape.d;
  c.n_heads = shape.h;
  const InferenceShape s = InferenceShape::from(shape);
  return static_cast<double>(predict_inference_total(c, s, EngineKind::pid)) /
         static_cast<double>(predict_inference_total(c, s, EngineKind::pie));
}

// Teacher-forced forward over one training example of the given layout.
// The decoder runs the shifted target (and, for PiD, the prompt prefix) in
// one causal pass; the output projection covers target rows only.
inline CounterSet predict_training_forward_flops(const ModelConfig& config,
                                                 const InferenceShape& s, EngineKind kind) {
  const flops::Dims x(config);
  CounterSet out;
  const std::uint64_t passes = kind == EngineKind::pie ? s.U : 1;
  const std::uint64_t enc_len = s.encoder_len(kind);
  for (std::uint64_t i = 0; i < passes; ++i) {
    add_encoder_pass(config, enc_len, out);
    add_cross_projection(config, enc_len, out);
  }
  const std::uint64_t rows = s.prefix_len(kind) + s.n_t - 1;
  for (std::uint64_t u = 0; u < s.U; ++u) {
    out.at(Component::embedding).flops += rows * x.d + flops::matmul(s.n_t, x.d, x.vocab);
    out.at(Component::embedding).flops += flops::layer_norm(x, s.n_t);
    out.at(Component::decoder_self).flops +=
        x.dec_layers * (flops::self_projections(x, rows) + flops::attention_context(x, rows, rows));
    out.at(Component::decoder_cross).flops +=
        x.dec_layers * (flops::cross_projections(x, rows) + flops::attention_context(x, rows, enc_len));
    out.at(Component::feed_forward).flops += x.dec_layers * flops::feed_forward(x, rows);
  }
  return out;
}

// Backward costs roughly twice the forward; a training step is then three
// forwards. Used as the analytic prediction for per-epoch training flops.
inline constexpr double kTrainingToForwardRatio = 3.0;

inline double predict_training_step_flops(const ModelConfig& config, const InferenceShape& s,
                                          EngineKind kind) {
  return kTrainingToForwardRatio *
         static_cast<double>(predict_training_forward_flops(config, s, kind).total().flops);
}

}  // namespace encdec
