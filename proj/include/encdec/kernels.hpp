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

// Dense kernels. Every kernel reports its arithmetic and memory traffic to a
// CounterSink using one fixed convention:
//
//   * a multiply-add is 2 flops; other elementwise ops are 1 flop each;
//   * every operand is read once and every result written once per call
//     (no cache modeling), at sizeof(T) bytes per element.
//
// The per-element costs of non-matmul kernels are the constants below.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "encdec/counters.hpp"
#include "encdec/matrix.hpp"

namespace encdec {

// max, subtract, exp, sum, divide
inline constexpr std::uint64_t kSoftmaxFlopsPerElement = 5;
// mean (1), variance (3), normalize and apply gain (3)
inline constexpr std::uint64_t kLayerNormFlopsPerElement = 7;
inline constexpr double kLayerNormEpsilon = 1e-6;

using TokenId = std::int32_t;

namespace detail {

template <typename T>
void count(CounterSink& sink, std::uint64_t flops, std::uint64_t read_elems,
           std::uint64_t written_elems) {
  sink.flops += flops;
  sink.bytes_read += read_elems * sizeof(T);
  sink.bytes_written += written_elems * sizeof(T);
}

template <typename T>
void require_same_shape(const BasicMatrix<T>& a, const BasicMatrix<T>& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": lhs " + shape_string(a) + " and rhs " +
                     shape_string(b) + " differ");
  }
}

}  // namespace detail

// a[m x k] * b[k x n].
template <typename T>
BasicMatrix<T> matmul(const BasicMatrix<T>& a, const BasicMatrix<T>& b, CounterSink& sink) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: lhs " + shape_string(a) + " and rhs " + shape_string(b) +
                     " have mismatched inner dimensions");
  }
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  BasicMatrix<T> out(m, n);
  for (std::size_t i = 0; i < m; ++i) {
    T* o = out.row(i).data();
    const T* ar = a.row(i).data();
    for (std::size_t p = 0; p < k; ++p) {
      const T av = ar[p];
      const T* br = b.row(p).data();
      for (std::size_t j = 0; j < n; ++j) o[j] += av * br[j];
    }
  }
  detail::count<T>(sink, 2ull * m * n * k, m * k + k * n, m * n);
  return out;
}

// a[m x k] * b[n x k]^T.
template <typename T>
BasicMatrix<T> matmul_nt(const BasicMatrix<T>& a, const BasicMatrix<T>& b, CounterSink& sink) {
  if (a.cols() != b.cols()) {
    throw ShapeError("matmul_nt: lhs " + shape_string(a) + " and rhs " + shape_string(b) +
                     " have mismatched inner dimensions");
  }
  const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
  BasicMatrix<T> out(m, n);
  for (std::size_t i = 0; i < m; ++i) {
    const T* ar = a.row(i).data();
    for (std::size_t j = 0; j < n; ++j) {
      const T* br = b.row(j).data();
      T acc{0};
      for (std::size_t p = 0; p < k; ++p) acc += ar[p] * br[p];
      out(i, j) = acc;
    }
  }
  detail::count<T>(sink, 2ull * m * n * k, m * k + n * k, m * n);
  return out;
}

// a[k x m]^T * b[k x n].
template <typename T>
BasicMatrix<T> matmul_tn(const BasicMatrix<T>& a, const BasicMatrix<T>& b, CounterSink& sink) {
  if (a.rows() != b.rows()) {
    throw ShapeError("matmul_tn: lhs " + shape_string(a) + " and rhs " + shape_string(b) +
                     " have mismatched inner dimensions");
  }
  const std::size_t k = a.rows(), m = a.cols(), n = b.cols();
  BasicMatrix<T> out(m, n);
  for (std::size_t p = 0; p < k; ++p) {
    const T* ar = a.row(p).data();
    const T* br = b.row(p).data();
    for (std::size_t i = 0; i < m; ++i) {
      const T av = ar[i];
      T* o = out.row(i).data();
      for (std::size_t j = 0; j < n; ++j) o[j] += av * br[j];
    }
  }
  detail::count<T>(sink, 2ull * m * n * k, m * k + k * n, m * n);
  return out;
}

template <typename T>
BasicMatrix<T> add(const BasicMatrix<T>& a, const BasicMatrix<T>& b, CounterSink& sink) {
  detail::require_same_shape(a, b, "add");
  BasicMatrix<T> out = a;
  auto o = out.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] += bd[i];
  detail::count<T>(sink, a.size(), 2 * a.size(), a.size());
  return out;
}

template <typename T>
BasicMatrix<T> scale(const BasicMatrix<T>& a, T factor, CounterSink& sink) {
  BasicMatrix<T> out = a;
  for (T& v : out.data()) v *= factor;
  detail::count<T>(sink, a.size(), a.size(), a.size());
  return out;
}

template <typename T>
BasicMatrix<T> relu(const BasicMatrix<T>& a, CounterSink& sink) {
  BasicMatrix<T> out = a;
  for (T& v : out.data()) v = v > T{0} ? v : T{0};
  detail::count<T>(sink, a.size(), a.size(), a.size());
  return out;
}

namespace detail {

// Softmax over row `r` restricted to entries with allowed[c] != 0; masked
// entries become exactly zero. Returns false when no entry is allowed.
template <typename T>
bool softmax_row(std::span<T> row, const std::uint8_t* allowed) {
  T mx = -std::numeric_limits<T>::infinity();
  for (std::size_t c = 0; c < row.size(); ++c) {
    if (!allowed || allowed[c]) mx = row[c] > mx ? row[c] : mx;
  }
  if (mx == -std::numeric_limits<T>::infinity()) return false;
  T sum{0};
  for (std::size_t c = 0; c < row.size(); ++c) {
    if (!allowed || allowed[c]) {
      row[c] = std::exp(row[c] - mx);
      sum += row[c];
    } else {
      row[c] = T{0};
    }
  }
  for (T& v : row) v /= sum;
  return true;
}

}  // namespace detail

// Row-wise softmax, stabilized by subtracting each row's max.
template <typename T>
BasicMatrix<T> softmax_rows(const BasicMatrix<T>& a, CounterSink& sink) {
  BasicMatrix<T> out = a;
  for (std::size_t r = 0; r < out.rows(); ++r) detail::softmax_row<T>(out.row(r), nullptr);
  detail::count<T>(sink, kSoftmaxFlopsPerElement * a.size(), a.size(), a.size());
  return out;
}

// Softmax over allowed entries only. `allowed` is row-major with a's shape.
// A row with no allowed entry is an error.
template <typename T>
BasicMatrix<T> masked_softmax_rows(const BasicMatrix<T>& a, std::span<const std::uint8_t> allowed,
                                   CounterSink& sink) {
  if (allowed.size() != a.size()) {
    throw ShapeError("masked_softmax_rows: mask size does not match " + shape_string(a));
  }
  BasicMatrix<T> out = a;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    if (!detail::softmax_row<T>(out.row(r), allowed.data() + r * a.cols())) {
      throw MaskError("attention mask row " + std::to_string(r) + " allows no key");
    }
  }
  detail::count<T>(sink, kSoftmaxFlopsPerElement * a.size(), a.size(), a.size());
  return out;
}

// Per-row statistics of layer_norm, kept for the backward pass.
template <typename T>
struct LayerNormStats {
  std::vector<T> mean;
  std::vector<T> inv_std;
};

// y = gain * (x - mean) / sqrt(var + 1e-6), per row. The epsilon is always
// applied, so constant rows map to zero instead of dividing by zero.
template <typename T>
BasicMatrix<T> layer_norm(const BasicMatrix<T>& a, std::span<const T> gain, CounterSink& sink,
                          LayerNormStats<T>* stats = nullptr) {
  if (gain.size() != a.cols()) {
    throw ShapeError("layer_norm: gain of length " + std::to_string(gain.size()) +
                     " does not match " + shape_string(a));
  }
  const std::size_t n = a.cols();
  BasicMatrix<T> out(a.rows(), n);
  if (stats) {
    stats->mean.assign(a.rows(), T{0});
    stats->inv_std.assign(a.rows(), T{0});
  }
  for (std::size_t r = 0; r < a.rows(); ++r) {
    auto x = a.row(r);
    T mean{0};
    for (T v : x) mean += v;
    mean /= static_cast<T>(n);
    T var{0};
    for (T v : x) var += (v - mean) * (v - mean);
    var /= static_cast<T>(n);
    const T inv_std = T{1} / std::sqrt(var + static_cast<T>(kLayerNormEpsilon));
    auto y = out.row(r);
    for (std::size_t c = 0; c < n; ++c) y[c] = (x[c] - mean) * inv_std * gain[c];
    if (stats) {
      stats->mean[r] = mean;
      stats->inv_std[r] = inv_std;
    }
  }
  detail::count<T>(sink, kLayerNormFlopsPerElement * a.size(), a.size() + n, a.size());
  return out;
}

// Embedding lookup: rows of `table` selected by `ids`. Data movement only.
template <typename T>
BasicMatrix<T> gather_rows(const BasicMatrix<T>& table, std::span<const TokenId> ids,
                           CounterSink& sink) {
  BasicMatrix<T> out(ids.size(), table.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= table.rows()) {
      throw ShapeError("gather_rows: id " + std::to_string(ids[i]) + " outside table of " +
                       std::to_string(table.rows()) + " rows");
    }
    auto src = table.row(static_cast<std::size_t>(ids[i]));
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  detail::count<T>(sink, 0, out.size(), out.size());
  return out;
}

template <typename T>
bool all_finite(const BasicMatrix<T>& a) {
  for (T v : a.data()) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace encdec
