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

// Forward passes of the toy encoder-decoder transformer: pre-layer-norm
// residual blocks, sinusoidal absolute positions, ReLU feed-forward.
// Kernel costs are attributed by the component whose code issues the call.

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "encdec/attention.hpp"
#include "encdec/config.hpp"
#include "encdec/counters.hpp"
#include "encdec/kernels.hpp"
#include "encdec/kv_cache.hpp"
#include "encdec/weights.hpp"

namespace encdec {

// Rows for positions first_pos .. first_pos + n - 1:
//   pe[p][2i] = sin(p / 10000^(2i/d)),  pe[p][2i+1] = cos(p / 10000^(2i/d)).
template <typename T>
BasicMatrix<T> positional_encoding(std::size_t first_pos, std::size_t n, std::size_t d) {
  BasicMatrix<T> pe(n, d);
  for (std::size_t r = 0; r < n; ++r) {
    const double pos = static_cast<double>(first_pos + r);
    for (std::size_t c = 0; c < d; ++c) {
      const double rate = std::pow(10000.0, static_cast<double>(c - c % 2) / static_cast<double>(d));
      pe(r, c) = static_cast<T>(c % 2 == 0 ? std::sin(pos / rate) : std::cos(pos / rate));
    }
  }
  return pe;
}

template <typename T>
BasicMatrix<T> embed(const ModelConfig& config, const BasicWeightSet<T>& w,
                     std::span<const TokenId> tokens, std::size_t first_pos,
                     CounterSet& counters) {
  for (TokenId t : tokens) {
    if (t < 0 || static_cast<std::size_t>(t) >= config.vocab_size) {
      throw UsageError("token id " + std::to_string(t) + " outside vocabulary of " +
                       std::to_string(config.vocab_size));
    }
  }
  CounterSink& sink = counters.at(Component::embedding);
  return add(gather_rows(w.embedding, tokens, sink),
             positional_encoding<T>(first_pos, tokens.size(), config.d_model), sink);
}

namespace detail {

template <typename T>
BasicMatrix<T> feed_forward(const BasicMatrix<T>& x, std::span<const T> gain,
                            const BasicMatrix<T>& w1, const BasicMatrix<T>& w2,
                            CounterSink& sink) {
  BasicMatrix<T> h = layer_norm(x, gain, sink);
  return add(x, matmul(relu(matmul(h, w1, sink), sink), w2, sink), sink);
}

template <typename T>
void check_length(const ModelConfig& config, std::size_t n, const char* what) {
  if (n == 0) throw LengthError(std::string(what) + ": empty sequence");
  if (n > config.max_len) {
    throw LengthError(std::string(what) + ": length " + std::to_string(n) + " exceeds max_len " +
                      std::to_string(config.max_len));
  }
}

}  // namespace detail

// Contextual embeddings M [len x d] of one token sequence.
template <typename T>
BasicMatrix<T> encoder_forward(const ModelConfig& config, const BasicWeightSet<T>& w,
                               std::span<const TokenId> tokens, CounterSet& counters) {
  detail::check_length<T>(config, tokens.size(), "encoder_forward");
  BasicMatrix<T> x = embed(config, w, tokens, 0, counters);
  const AttentionMask mask = AttentionMask::full(tokens.size(), tokens.size());
  for (const auto& layer : w.encoder) {
    CounterSink& s = counters.at(Component::encoder_self);
    BasicMatrix<T> h = layer_norm(x, std::span<const T>(layer.ln_attn), s);
    BasicMatrix<T> ctx = attention_context(matmul(h, layer.self.wq, s), matmul(h, layer.self.wk, s),
                                           matmul(h, layer.self.wv, s), mask, config.n_heads, s);
    x = add(x, matmul(ctx, layer.self.wo, s), s);
    x = detail::feed_forward(x, std::span<const T>(layer.ln_ffn), layer.w1, layer.w2,
                             counters.at(Component::feed_forward));
  }
  // The closing norm belongs to the encoder stack.
  return layer_norm(x, std::span<const T>(w.enc_final_ln), counters.at(Component::encoder_self));
}

template <typename T>
std::vector<BasicMatrix<T>> encoder_forward_batch(const ModelConfig& config,
                                                  const BasicWeightSet<T>& w,
                                                  const std::vector<std::vector<TokenId>>& batch,
                                                  CounterSet& counters) {
  std::vector<BasicMatrix<T>> out;
  out.reserve(batch.size());
  for (const auto& tokens : batch) out.push_back(encoder_forward(config, w, tokens, counters));
  return out;
}

// K = M W^K and V = M W^V for every decoder layer's cross-attention.
template <typename T>
CrossKv<T> project_cross_kv(const ModelConfig& config, const BasicWeightSet<T>& w,
                            const BasicMatrix<T>& m, CounterSet& counters) {
  (void)config;
  CounterSink& s = counters.at(Component::decoder_cross);
  CrossKv<T> kv;
  kv.layers.reserve(w.decoder.size());
  for (const auto& layer : w.decoder) {
    kv.layers.push_back({matmul(m, layer.cross.wk, s), matmul(m, layer.cross.wv, s)});
  }
  return kv;
}

// Whole-sequence decoder pass with no cache. Returns logits for every
// position [len x vocab]. Used as the reference for incremental decoding.
template <typename T>
BasicMatrix<T> decoder_forward_full(const ModelConfig& config, const BasicWeightSet<T>& w,
                                    const CrossKv<T>& cross, std::span<const TokenId> tokens,
                                    CounterSet& counters) {
  detail::check_length<T>(config, tokens.size(), "decoder_forward_full");
  const std::size_t n = tokens.size();
  BasicMatrix<T> x = embed(config, w, tokens, 0, counters);
  const AttentionMask self_mask = AttentionMask::causal(n, n, 0);
  const AttentionMask cross_mask = AttentionMask::full(n, cross.length());
  for (std::size_t l = 0; l < w.decoder.size(); ++l) {
    const auto& layer = w.decoder[l];
    {
      CounterSink& s = counters.at(Component::decoder_self);
      BasicMatrix<T> h = layer_norm(x, std::span<const T>(layer.ln_self), s);
      BasicMatrix<T> ctx =
          attention_context(matmul(h, layer.self.wq, s), matmul(h, layer.self.wk, s),
                            matmul(h, layer.self.wv, s), self_mask, config.n_heads, s);
      x = add(x, matmul(ctx, layer.self.wo, s), s);
    }
    {
      CounterSink& s = counters.at(Component::decoder_cross);
      BasicMatrix<T> h = layer_norm(x, std::span<const T>(layer.ln_cross), s);
      BasicMatrix<T> ctx = attention_context(matmul(h, layer.cross.wq, s), cross.layers[l].k,
                                             cross.layers[l].v, cross_mask, config.n_heads, s);
      x = add(x, matmul(ctx, layer.cross.wo, s), s);
    }
    x = detail::feed_forward(x, std::span<const T>(layer.ln_ffn), layer.w1, layer.w2,
                             counters.at(Component::feed_forward));
  }
  // Final norm and output projection form the output head.
  BasicMatrix<T> h = layer_norm(x, std::span<const T>(w.dec_final_ln), counters.at(Component::embedding));
  return matmul(h, w.lm_head, counters.at(Component::embedding));
}

// Incremental decoder step over the listed streams. Each stream contributes a
// block of `block_len` new tokens (row-major in `tokens`), placed at the
// positions following its cached ones and appended to its self-attention
// cache. Streams sharing a cross-attention entry are attended as one batched
// query block against that entry's K/V. Returns next-token logits for the
// last position of each stream's block [streams x vocab].
template <typename T>
BasicMatrix<T> decoder_step(const ModelConfig& config, const BasicWeightSet<T>& w,
                            BasicKVCacheSet<T>& state, std::span<const std::size_t> streams,
                            std::span<const TokenId> tokens, std::size_t block_len,
                            CounterSet& counters) {
  const std::size_t n_streams = streams.size();
  if (block_len == 0 || tokens.size() != n_streams * block_len) {
    throw ShapeError("decoder_step: " + std::to_string(tokens.size()) + " tokens for " +
                     std::to_string(n_streams) + " streams of block " + std::to_string(block_len));
  }
  if (n_streams == 0) return BasicMatrix<T>(0, config.vocab_size);
  for (std::size_t s : streams) {
    if (state.self[s].length + block_len > config.max_len) {
      throw LengthError("decoder_step: stream " + std::to_string(s) + " would reach position " +
                        std::to_string(state.self[s].length + block_len) + " > max_len " +
                        std::to_string(config.max_len));
    }
  }

  const std::size_t d = config.d_model;
  BasicMatrix<T> x(0, d);
  x.reserve_rows(n_streams * block_len);
  for (std::size_t i = 0; i < n_streams; ++i) {
    x.append_rows(embed(config, w, tokens.subspan(i * block_len, block_len),
                        state.self[streams[i]].length, counters));
  }

  // Streams grouped by shared cross-attention entry, in first-seen order.
  std::vector<std::vector<std::size_t>> groups;  // indices into `streams`
  std::vector<std::size_t> group_entry;
  for (std::size_t i = 0; i < n_streams; ++i) {
    const std::size_t entry = state.cross_of_stream[streams[i]];
    std::size_t g = 0;
    while (g < group_entry.size() && group_entry[g] != entry) ++g;
    if (g == group_entry.size()) {
      group_entry.push_back(entry);
      groups.emplace_back();
    }
    groups[g].push_back(i);
  }

  for (std::size_t l = 0; l < w.decoder.size(); ++l) {
    const auto& layer = w.decoder[l];
    {
      CounterSink& s = counters.at(Component::decoder_self);
      BasicMatrix<T> h = layer_norm(x, std::span<const T>(layer.ln_self), s);
      BasicMatrix<T> q = matmul(h, layer.self.wq, s);
      BasicMatrix<T> k = matmul(h, layer.self.wk, s);
      BasicMatrix<T> v = matmul(h, layer.self.wv, s);
      BasicMatrix<T> ctx(n_streams * block_len, d);
      for (std::size_t i = 0; i < n_streams; ++i) {
        StreamCache<T>& cache = state.self[streams[i]];
        LayerKv<T>& kv = cache.layers[l];
        kv.k.append_rows(k.slice_rows(i * block_len, block_len));
        kv.v.append_rows(v.slice_rows(i * block_len, block_len));
        const AttentionMask mask = AttentionMask::causal(block_len, kv.k.rows(), cache.length);
        BasicMatrix<T> c = attention_context(q.slice_rows(i * block_len, block_len), kv.k, kv.v,
                                             mask, config.n_heads, s);
        for (std::size_t r = 0; r < block_len; ++r) {
          std::copy(c.row(r).begin(), c.row(r).end(), ctx.row(i * block_len + r).begin());
        }
      }
      x = add(x, matmul(ctx, layer.self.wo, s), s);
    }
    {
      CounterSink& s = counters.at(Component::decoder_cross);
      BasicMatrix<T> h = layer_norm(x, std::span<const T>(layer.ln_cross), s);
      BasicMatrix<T> q = matmul(h, layer.cross.wq, s);
      BasicMatrix<T> ctx(n_streams * block_len, d);
      for (std::size_t g = 0; g < groups.size(); ++g) {
        const LayerKv<T>& kv = state.cross[group_entry[g]].layers[l];
        BasicMatrix<T> qg(0, d);
        qg.reserve_rows(groups[g].size() * block_len);
        for (std::size_t i : groups[g]) qg.append_rows(q.slice_rows(i * block_len, block_len));
        const AttentionMask mask = AttentionMask::full(qg.rows(), kv.k.rows());
        BasicMatrix<T> c = attention_context(qg, kv.k, kv.v, mask, config.n_heads, s);
        std::size_t row = 0;
        for (std::size_t i : groups[g]) {
          for (std::size_t r = 0; r < block_len; ++r, ++row) {
            std::copy(c.row(row).begin(), c.row(row).end(), ctx.row(i * block_len + r).begin());
          }
        }
      }
      x = add(x, matmul(ctx, layer.cross.wo, s), s);
    }
    x = detail::feed_forward(x, std::span<const T>(layer.ln_ffn), layer.w1, layer.w2,
                             counters.at(Component::feed_forward));
  }
  for (std::size_t s : streams) state.self[s].length += block_len;

  BasicMatrix<T> last(n_streams, d);
  for (std::size_t i = 0; i < n_streams; ++i) {
    auto src = x.row(i * block_len + block_len - 1);
    std::copy(src.begin(), src.end(), last.row(i).begin());
  }
  BasicMatrix<T> h =
      layer_norm(last, std::span<const T>(w.dec_final_ln), counters.at(Component::embedding));
  return matmul(h, w.lm_head, counters.at(Component::embedding));
}

}  // namespace encdec
