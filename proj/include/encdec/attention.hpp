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

#include <cmath>
#include <cstdint>
#include <vector>

#include "encdec/kernels.hpp"

namespace encdec {

// Which keys each query may attend to; row-major [query_len x key_len].
class AttentionMask {
 public:
  AttentionMask() = default;
  AttentionMask(std::size_t queries, std::size_t keys, bool fill)
      : queries_(queries), keys_(keys), allowed_(queries * keys, fill ? 1 : 0) {}

  static AttentionMask full(std::size_t queries, std::size_t keys) {
    return AttentionMask(queries, keys, true);
  }

  // Query i sits at absolute position `first_query_pos + i` and sees keys at
  // positions <= its own. Keys are positions 0..keys-1.
  static AttentionMask causal(std::size_t queries, std::size_t keys,
                              std::size_t first_query_pos) {
    AttentionMask m(queries, keys, false);
    for (std::size_t i = 0; i < queries; ++i) {
      for (std::size_t j = 0; j < keys && j <= first_query_pos + i; ++j) m.set(i, j, true);
    }
    return m;
  }

  std::size_t queries() const noexcept { return queries_; }
  std::size_t keys() const noexcept { return keys_; }
  bool allowed(std::size_t q, std::size_t k) const { return allowed_[q * keys_ + k] != 0; }
  void set(std::size_t q, std::size_t k, bool v) { allowed_[q * keys_ + k] = v ? 1 : 0; }
  std::span<const std::uint8_t> data() const noexcept { return allowed_; }

 private:
  std::size_t queries_ = 0;
  std::size_t keys_ = 0;
  std::vector<std::uint8_t> allowed_;
};

// Multi-head attention without the output projection:
//   concat_h softmax(Q_h K_h^T / sqrt(d/h)) V_h
// Q is [n x d], K and V are [m x d]; heads are contiguous column blocks.
// K and V reads are additionally booked to sink.kv_bytes_read. When
// `weights_out` is given it receives the per-head attention probabilities.
template <typename T>
BasicMatrix<T> attention_context(const BasicMatrix<T>& q, const BasicMatrix<T>& k,
                                 const BasicMatrix<T>& v, const AttentionMask& mask,
                                 std::size_t n_heads, CounterSink& sink,
                                 std::vector<BasicMatrix<T>>* weights_out = nullptr) {
  if (k.rows() != v.rows() || k.cols() != q.cols() || v.cols() != q.cols()) {
    throw ShapeError("attention: Q " + shape_string(q) + ", K " + shape_string(k) + ", V " +
                     shape_string(v) + " are inconsistent");
  }
  if (mask.queries() != q.rows() || mask.keys() != k.rows()) {
    throw ShapeError("attention: mask " + shape_string(mask.queries(), mask.keys()) +
                     " does not match scores " + shape_string(q.rows(), k.rows()));
  }
  if (n_heads == 0 || q.cols() % n_heads != 0) {
    throw ShapeError("attention: width " + std::to_string(q.cols()) +
                     " not divisible into " + std::to_string(n_heads) + " heads");
  }
  const std::size_t dk = q.cols() / n_heads;
  const T inv_sqrt = T{1} / std::sqrt(static_cast<T>(dk));
  BasicMatrix<T> out(q.rows(), q.cols());
  if (weights_out) weights_out->clear();
  for (std::size_t h = 0; h < n_heads; ++h) {
    BasicMatrix<T> qh = q.slice_cols(h * dk, dk);
    BasicMatrix<T> kh = k.slice_cols(h * dk, dk);
    BasicMatrix<T> vh = v.slice_cols(h * dk, dk);
    BasicMatrix<T> scores = scale(matmul_nt(qh, kh, sink), inv_sqrt, sink);
    BasicMatrix<T> probs = masked_softmax_rows(scores, mask.data(), sink);
    out.set_cols(h * dk, matmul(probs, vh, sink));
    sink.kv_bytes_read += (kh.size() + vh.size()) * sizeof(T);
    if (weights_out) weights_out->push_back(std::move(probs));
  }
  return out;
}

// O = softmax(Q K^T / sqrt(d/h)) V W_O, computed per head over joint width d.
template <typename T>
BasicMatrix<T> attention(const BasicMatrix<T>& q, const BasicMatrix<T>& k,
                         const BasicMatrix<T>& v, const BasicMatrix<T>& w_o,
                         const AttentionMask& mask, std::size_t n_heads, CounterSink& sink) {
  return matmul(attention_context(q, k, v, mask, n_heads, sink), w_o, sink);
}

}  // namespace encdec
