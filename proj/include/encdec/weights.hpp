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

#include <cstdint>
#include <cstring>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "encdec/config.hpp"
#include "encdec/matrix.hpp"

namespace encdec {

template <typename T>
struct AttentionWeights {
  BasicMatrix<T> wq, wk, wv, wo;  // each d x d, all heads jointly
};

template <typename T>
struct EncoderLayerWeights {
  std::vector<T> ln_attn, ln_ffn;
  AttentionWeights<T> self;
  BasicMatrix<T> w1;  // d x d_ff
  BasicMatrix<T> w2;  // d_ff x d
};

template <typename T>
struct DecoderLayerWeights {
  std::vector<T> ln_self, ln_cross, ln_ffn;
  AttentionWeights<T> self, cross;
  BasicMatrix<T> w1, w2;
};

template <typename T>
struct BasicWeightSet {
  BasicMatrix<T> embedding;  // vocab x d
  std::vector<EncoderLayerWeights<T>> encoder;
  std::vector<T> enc_final_ln;
  std::vector<DecoderLayerWeights<T>> decoder;
  std::vector<T> dec_final_ln;
  BasicMatrix<T> lm_head;  // d x vocab
};

using WeightSet = BasicWeightSet<float>;

// Visits every parameter buffer in a fixed order as (name, values).
// Matrices and gain vectors alike are presented as flat spans.
template <typename W, typename F>
void for_each_parameter(W& w, F&& f) {
  auto mat = [&](const std::string& name, auto& m) { f(name, m.data()); };
  auto vec = [&](const std::string& name, auto& v) { f(name, std::span(v)); };
  auto attn = [&](const std::string& p, auto& a) {
    mat(p + ".wq", a.wq);
    mat(p + ".wk", a.wk);
    mat(p + ".wv", a.wv);
    mat(p + ".wo", a.wo);
  };
  mat("embedding", w.embedding);
  for (std::size_t l = 0; l < w.encoder.size(); ++l) {
    auto& e = w.encoder[l];
    const std::string p = "enc" + std::to_string(l);
    vec(p + ".ln_attn", e.ln_attn);
    attn(p + ".self", e.self);
    vec(p + ".ln_ffn", e.ln_ffn);
    mat(p + ".w1", e.w1);
    mat(p + ".w2", e.w2);
  }
  vec("enc_final_ln", w.enc_final_ln);
  for (std::size_t l = 0; l < w.decoder.size(); ++l) {
    auto& e = w.decoder[l];
    const std::string p = "dec" + std::to_string(l);
    vec(p + ".ln_self", e.ln_self);
    attn(p + ".self", e.self);
    vec(p + ".ln_cross", e.ln_cross);
    attn(p + ".cross", e.cross);
    vec(p + ".ln_ffn", e.ln_ffn);
    mat(p + ".w1", e.w1);
    mat(p + ".w2", e.w2);
  }
  vec("dec_final_ln", w.dec_final_ln);
  mat("lm_head", w.lm_head);
}

// Zero-filled weights with the shapes implied by `config`; gains are ones.
template <typename T>
BasicWeightSet<T> make_weight_shapes(const ModelConfig& config, T gain_fill = T{1}) {
  config.validate();
  const std::size_t d = config.d_model, f = config.d_ff;
  auto sq = [&] { return BasicMatrix<T>(d, d); };
  auto attn = [&] { return AttentionWeights<T>{sq(), sq(), sq(), sq()}; };
  auto gain = [&] { return std::vector<T>(d, gain_fill); };
  BasicWeightSet<T> w;
  w.embedding = BasicMatrix<T>(config.vocab_size, d);
  for (std::size_t l = 0; l < config.n_enc_layers; ++l) {
    w.encoder.push_back({gain(), gain(), attn(), BasicMatrix<T>(d, f), BasicMatrix<T>(f, d)});
  }
  w.enc_final_ln = gain();
  for (std::size_t l = 0; l < config.n_dec_layers; ++l) {
    w.decoder.push_back(
        {gain(), gain(), gain(), attn(), attn(), BasicMatrix<T>(d, f), BasicMatrix<T>(f, d)});
  }
  w.dec_final_ln = gain();
  w.lm_head = BasicMatrix<T>(d, config.vocab_size);
  return w;
}

inline constexpr float kInitRange = 0.05f;

// Deterministic initialization. Matrix entries are uniform in
// [-0.05, 0.05): std::mt19937_64 seeded with `seed`, top 24 bits of each draw
// mapped to [0, 1), visited in for_each_parameter order. Gains are 1.
inline WeightSet init_weights(const ModelConfig& config, std::uint64_t seed) {
  WeightSet w = make_weight_shapes<float>(config);
  std::mt19937_64 rng(seed);
  for_each_parameter(w, [&](const std::string& name, std::span<float> values) {
    if (name.find("ln") != std::string::npos) return;
    for (float& v : values) {
      const float u = static_cast<float>(rng() >> 40) * 0x1.0p-24f;
      v = (2.0f * u - 1.0f) * kInitRange;
    }
  });
  return w;
}

// FNV-1a over the raw bytes of every parameter, in visitation order.
template <typename W>
std::uint64_t weight_checksum(const W& w) {
  std::uint64_t h = 1469598103934665603ull;
  for_each_parameter(w, [&](const std::string&, auto values) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(values.data());
    for (std::size_t i = 0; i < values.size_bytes(); ++i) {
      h ^= bytes[i];
      h *= 1099511628211ull;
    }
  });
  return h;
}

template <typename U, typename T>
BasicWeightSet<U> cast_weights(const BasicWeightSet<T>& w) {
  BasicWeightSet<U> out;
  auto cv = [](const std::vector<T>& v) { return std::vector<U>(v.begin(), v.end()); };
  auto ca = [](const AttentionWeights<T>& a) {
    return AttentionWeights<U>{a.wq.template cast<U>(), a.wk.template cast<U>(),
                               a.wv.template cast<U>(), a.wo.template cast<U>()};
  };
  out.embedding = w.embedding.template cast<U>();
  for (const auto& e : w.encoder) {
    out.encoder.push_back({cv(e.ln_attn), cv(e.ln_ffn), ca(e.self), e.w1.template cast<U>(),
                           e.w2.template cast<U>()});
  }
  out.enc_final_ln = cv(w.enc_final_ln);
  for (const auto& e : w.decoder) {
    out.decoder.push_back({cv(e.ln_self), cv(e.ln_cross), cv(e.ln_ffn), ca(e.self), ca(e.cross),
                           e.w1.template cast<U>(), e.w2.template cast<U>()});
  }
  out.dec_final_ln = cv(w.dec_final_ln);
  out.lm_head = w.lm_head.template cast<U>();
  return out;
}

template <typename T>
std::size_t parameter_count(const BasicWeightSet<T>& w) {
  std::size_t n = 0;
  for_each_parameter(w, [&](const std::string&, auto values) { n += values.size(); });
  return n;
}

}  // namespace encdec
