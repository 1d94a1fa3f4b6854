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

#include <algorithm>
#include <cmath>
#include <random>
#include <span>
#include <vector>

#include "encdec/engines.hpp"

namespace encdec::testing {

inline TokenSeq random_tokens(std::size_t n, std::size_t vocab, std::mt19937_64& rng) {
  std::uniform_int_distribution<TokenId> dist(kFirstFreeToken, static_cast<TokenId>(vocab - 1));
  TokenSeq t(n);
  for (auto& x : t) x = dist(rng);
  return t;
}

// b instances with random X of length n_s and U random prompts of length n_p.
inline Workload random_workload(std::uint64_t seed, std::size_t vocab, std::size_t b,
                                std::size_t u, std::size_t n_s, std::size_t n_p,
                                std::size_t max_new, bool stop_at_eos = true) {
  std::mt19937_64 rng(seed);
  Workload wl;
  wl.max_new_tokens = max_new;
  wl.stop_at_eos = stop_at_eos;
  for (std::size_t i = 0; i < b; ++i) {
    Instance inst;
    inst.input = random_tokens(n_s, vocab, rng);
    for (std::size_t p = 0; p < u; ++p) inst.prompts.push_back(random_tokens(n_p, vocab, rng));
    wl.instances.push_back(std::move(inst));
  }
  return wl;
}

inline ModelConfig toy_config(std::size_t d = 16, std::size_t heads = 2, std::size_t layers = 2,
                              std::size_t vocab = 32, std::size_t max_len = 96) {
  ModelConfig c;
  c.d_model = d;
  c.n_heads = heads;
  c.n_enc_layers = layers;
  c.n_dec_layers = layers;
  c.d_ff = 2 * d;
  c.vocab_size = vocab;
  c.max_len = max_len;
  return c;
}

// Random weights scaled up so token identity matters and EOS shows up at
// varying steps.
inline Model sharpened_model(const ModelConfig& config, std::uint64_t seed, float factor = 16.f) {
  Model model = Model::create(config, seed);
  for_each_parameter(model.weights, [&](const std::string& name, std::span<float> v) {
    if (name.find("ln") != std::string::npos) return;
    for (float& x : v) x *= factor;
  });
  return model;
}

inline float max_abs_diff(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return INFINITY;
  float m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

inline float max_logit_diff(const DecodeResult& a, const DecodeResult& b) {
  if (a.stream_logits.size() != b.stream_logits.size()) return INFINITY;
  float m = 0;
  for (std::size_t s = 0; s < a.stream_logits.size(); ++s) {
    m = std::max(m, max_abs_diff(a.stream_logits[s], b.stream_logits[s]));
  }
  return m;
}

}  // namespace encdec::testing
