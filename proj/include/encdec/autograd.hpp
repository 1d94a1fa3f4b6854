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

// Minimal reverse-mode autodiff over the counting kernels. A Graph records
// operations on a tape; backward() replays it in reverse. Forward and
// backward kernel work is booked to the sink passed to each op, so
// training cost shows up under the same component labels as inference.

#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "encdec/errors.hpp"
#include "encdec/kernels.hpp"
#include "encdec/matrix.hpp"

namespace encdec {

template <typename T>
class Graph {
 public:
  using Id = std::size_t;

  // Constant input; no gradient.
  Id constant(BasicMatrix<T> value) { return push(std::move(value), false); }

  // Parameter referencing `value` (kept alive by the caller). After
  // backward(), its gradient is added into `grad_out` (same size).
  Id parameter(const BasicMatrix<T>& value, std::span<T> grad_out) {
    Node n;
    n.ref = &value;
    n.needs_grad = true;
    n.grad_out = grad_out;
    nodes_.push_back(std::move(n));
    return nodes_.size() - 1;
  }

  // Gain vector parameter, held as a 1 x n row.
  Id parameter(std::span<const T> gain, std::span<T> grad_out) {
    BasicMatrix<T> row(1, gain.size());
    std::copy(gain.begin(), gain.end(), row.data().begin());
    const Id id = push(std::move(row), true);
    nodes_[id].grad_out = grad_out;
    return id;
  }

  const BasicMatrix<T>& value(Id id) const {
    const Node& n = nodes_[id];
    return n.ref ? *n.ref : n.value;
  }
  const BasicMatrix<T>& grad(Id id) const { return nodes_[id].grad; }
  std::size_t size() const { return nodes_.size(); }

  Id matmul(Id a, Id b, CounterSink& s) {
    const Id out = push(encdec::matmul(value(a), value(b), s), needs(a) || needs(b));
    on_backward(out, [=, this, &s](const BasicMatrix<T>& g) {
      if (needs(a)) accumulate(a, encdec::matmul_nt(g, value(b), s), s);
      if (needs(b)) accumulate(b, encdec::matmul_tn(value(a), g, s), s);
    });
    return out;
  }

  // a * b^T
  Id matmul_nt(Id a, Id b, CounterSink& s) {
    const Id out = push(encdec::matmul_nt(value(a), value(b), s), needs(a) || needs(b));
    on_backward(out, [=, this, &s](const BasicMatrix<T>& g) {
      if (needs(a)) accumulate(a, encdec::matmul(g, value(b), s), s);
      if (needs(b)) accumulate(b, encdec::matmul_tn(g, value(a), s), s);
    });
    return out;
  }

  Id add(Id a, Id b, CounterSink& s) {
    const Id out = push(encdec::add(value(a), value(b), s), needs(a) || needs(b));
    on_backward(out, [=, this, &s](const BasicMatrix<T>& g) {
      if (needs(a)) accumulate(a, g, s);
      if (needs(b)) accumulate(b, g, s);
    });
    return out;
  }

  Id scale(Id a, T factor, CounterSink& s) {
    const Id out = push(encdec::scale(value(a), factor, s), needs(a));
    on_backward(out, [=, this, &s](const BasicMatrix<T>& g) {
      accumulate(a, encdec::scale(g, factor, s), s);
    });
    return out;
  }

  Id relu(Id a, CounterSink& s) {
    const Id out = push(encdec::relu(value(a), s), needs(a));
    on_backward(out, [=, this, &s](const BasicMatrix<T>& g) {
      BasicMatrix<T> d = g;
      const auto x = value(a).data();
      for (std::size_t i = 0; i < d.size(); ++i) {
        if (!(x[i] > T{0})) d.data()[i] = T{0};
      }
      detail::count<T>(s, d.size(), 2 * d.size(), d.size());
      accumulate(a, d, s);
    });
    return out;
  }

  Id layer_norm(Id x, Id gain, CounterSink& s) {
    auto stats = std::make_shared<LayerNormStats<T>>();
    const BasicMatrix<T>& g0 = value(gain);
    const Id out = push(encdec::layer_norm(value(x), std::span<const T>(g0.data()), s, stats.get()),
                        needs(x) || needs(gain));
    on_backward(out, [=, this, &s](const BasicMatrix<T>& g) {
      const BasicMatrix<T>& xv = value(x);
      const auto gv = value(gain).data();
      const std::size_t n = xv.cols();
      BasicMatrix<T> dx(xv.rows(), n);
      BasicMatrix<T> dg(1, n);
      for (std::size_t r = 0; r < xv.rows(); ++r) {
        const T mean = stats->mean[r], inv = stats->inv_std[r];
        T sum_dy = 0, sum_dy_xhat = 0;
        for (std::size_t c = 0; c < n; ++c) {
          const T xhat = (xv(r, c) - mean) * inv;
          const T dy = g(r, c) * gv[c];
          dg(0, c) += g(r, c) * xhat;
          sum_dy += dy;
          sum_dy_xhat += dy * xhat;
        }
        for (std::size_t c = 0; c < n; ++c) {
          const T xhat = (xv(r, c) - mean) * inv;
          const T dy = g(r, c) * gv[c];
          dx(r, c) = inv * (dy - sum_dy / static_cast<T>(n) - xhat * sum_dy_xhat / static_cast<T>(n));
        }
      }
      detail::count<T>(s, 12 * xv.size(), 2 * xv.size() + n, xv.size() + n);
      if (needs(x)) accumulate(x, dx, s);
      if (needs(gain)) accumulate(gain, dg, s);
    });
    return out;
  }

  // Softmax over allowed entries; masked entries are exactly zero.
  Id masked_softmax(Id a, std::vector<std::uint8_t> allowed, CounterSink& s) {
    const Id out = push(masked_softmax_rows(value(a), std::span<const std::uint8_t>(allowed), s),
                        needs(a));
    on_backward(out, [=, this, &s](const BasicMatrix<T>& g) {
      const BasicMatrix<T>& p = value(out);
      BasicMatrix<T> d(p.rows(), p.cols());
      for (std::size_t r = 0; r < p.rows(); ++r) {
        T dot = 0;
        for (std::size_t c = 0; c < p.cols(); ++c) dot += g(r, c) * p(r, c);
        for (std::size_t c = 0; c < p.cols(); ++c) d(r, c) = p(r, c) * (g(r, c) - dot);
      }
      detail::count<T>(s, 4 * p.size(), 2 * p.size(), p.size());
      accumulate(a, d, s);
    });
    return out;
  }

  // Rows of `table` selected by `ids`; backward scatter-adds.
  Id gather(Id table, std::vector<TokenId> ids, CounterSink& s) {
    const Id out = push(gather_rows(value(table), std::span<const TokenId>(ids), s), needs(table));
    on_backward(out, [=, this, &s](const BasicMatrix<T>& g) {
      BasicMatrix<T>& dt = grad_slot(table);
      for (std::size_t i = 0; i < ids.size(); ++i) {
        auto dst = dt.row(static_cast<std::size_t>(ids[i]));
        auto src = g.row(i);
        for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += src[c];
      }
      detail::count<T>(s, g.size(), 2 * g.size(), g.size());
    });
    return out;
  }

  Id slice_cols(Id a, std::size_t first, std::size_t n) {
    const Id out = push(value(a).slice_cols(first, n), needs(a));
    on_backward(out, [=, this](const BasicMatrix<T>& g) {
      BasicMatrix<T>& d = grad_slot(a);
      for (std::size_t r = 0; r < g.rows(); ++r) {
        for (std::size_t c = 0; c < n; ++c) d(r, first + c) += g(r, c);
      }
    });
    return out;
  }

  Id concat_cols(const std::vector<Id>& parts) {
    std::size_t cols = 0;
    bool ng = false;
    for (Id p : parts) {
      cols += value(p).cols();
      ng = ng || needs(p);
    }
    BasicMatrix<T> v(parts.empty() ? 0 : value(parts[0]).rows(), cols);
    std::size_t off = 0;
    for (Id p : parts) {
      v.set_cols(off, value(p));
      off += value(p).cols();
    }
    const Id out = push(std::move(v), ng);
    on_backward(out, [=, this](const BasicMatrix<T>& g) {
      std::size_t o = 0;
      for (Id p : parts) {
        const std::size_t w = value(p).cols();
        if (needs(p)) {
          BasicMatrix<T>& d = grad_slot(p);
          for (std::size_t r = 0; r < g.rows(); ++r) {
            for (std::size_t c = 0; c < w; ++c) d(r, c) += g(r, o + c);
          }
        }
        o += w;
      }
    });
    return out;
  }

  Id slice_rows(Id a, std::size_t first, std::size_t n) {
    const Id out = push(value(a).slice_rows(first, n), needs(a));
    on_backward(out, [=, this](const BasicMatrix<T>& g) {
      BasicMatrix<T>& d = grad_slot(a);
      for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < g.cols(); ++c) d(first + r, c) += g(r, c);
      }
    });
    return out;
  }

  // Mean cross-entropy of softmax(logits) against `targets`, one per row.
  Id cross_entropy(Id logits, std::vector<TokenId> targets, CounterSink& s) {
    const BasicMatrix<T>& z = value(logits);
    if (targets.size() != z.rows() || z.rows() == 0) {
      throw ShapeError("cross_entropy: " + std::to_string(targets.size()) + " targets for " +
                       shape_string(z));
    }
    auto probs = std::make_shared<BasicMatrix<T>>(softmax_rows(z, s));
    T loss = 0;
    for (std::size_t r = 0; r < z.rows(); ++r) {
      const auto t = static_cast<std::size_t>(targets[r]);
      if (t >= z.cols()) throw ShapeError("cross_entropy: target id outside logits");
      // log-sum-exp form stays finite where probs underflow.
      T mx = z(r, 0);
      for (std::size_t c = 1; c < z.cols(); ++c) mx = std::max(mx, z(r, c));
      T sum = 0;
      for (std::size_t c = 0; c < z.cols(); ++c) sum += std::exp(z(r, c) - mx);
      loss += mx + std::log(sum) - z(r, t);
    }
    loss /= static_cast<T>(z.rows());
    detail::count<T>(s, 2 * z.size(), z.size(), 1);
    BasicMatrix<T> v(1, 1);
    v(0, 0) = loss;
    const Id out = push(std::move(v), needs(logits));
    on_backward(out, [=, this, &s](const BasicMatrix<T>& g) {
      BasicMatrix<T> d = *probs;
      const T k = g(0, 0) / static_cast<T>(d.rows());
      for (std::size_t r = 0; r < d.rows(); ++r) d(r, static_cast<std::size_t>(targets[r])) -= T{1};
      for (T& x : d.data()) x *= k;
      detail::count<T>(s, 2 * d.size(), d.size(), d.size());
      accumulate(logits, d, s);
    });
    return out;
  }

  // Sum of 1x1 nodes.
  Id sum_scalars(const std::vector<Id>& xs, CounterSink& s) {
    if (xs.empty()) throw ShapeError("sum_scalars: empty");
    Id acc = xs[0];
    for (std::size_t i = 1; i < xs.size(); ++i) acc = add(acc, xs[i], s);
    return acc;
  }

  // Reverse pass from a 1x1 node; parameter gradients are added into their
  // grad_out buffers.
  void backward(Id loss) {
    if (value(loss).rows() != 1 || value(loss).cols() != 1) {
      throw ShapeError("backward: loss must be 1x1, got " + shape_string(value(loss)));
    }
    grad_slot(loss)(0, 0) = T{1};
    for (std::size_t i = loss + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (n.grad.size() == 0) continue;
      if (n.backward) n.backward(n.grad);
      if (!n.grad_out.empty()) {
        const auto g = n.grad.data();
        if (g.size() != n.grad_out.size()) throw ShapeError("backward: gradient buffer size mismatch");
        for (std::size_t k = 0; k < g.size(); ++k) n.grad_out[k] += g[k];
      }
    }
  }

 private:
  struct Node {
    BasicMatrix<T> value;
    const BasicMatrix<T>* ref = nullptr;
    BasicMatrix<T> grad;
    std::function<void(const BasicMatrix<T>&)> backward;
    std::span<T> grad_out;
    bool needs_grad = false;
  };

  bool needs(Id id) const { return nodes_[id].needs_grad; }

  Id push(BasicMatrix<T> v, bool needs_grad) {
    Node n;
    n.value = std::move(v);
    n.needs_grad = needs_grad;
    nodes_.push_back(std::move(n));
    return nodes_.size() - 1;
  }

  void on_backward(Id id, std::function<void(const BasicMatrix<T>&)> f) {
    if (nodes_[id].needs_grad) nodes_[id].backward = std::move(f);
  }

  BasicMatrix<T>& grad_slot(Id id) {
    Node& n = nodes_[id];
    if (n.grad.size() == 0) {
      const BasicMatrix<T>& v = value(id);
      n.grad = BasicMatrix<T>(v.rows(), v.cols());
    }
    return n.grad;
  }

  void accumulate(Id id, const BasicMatrix<T>& g, CounterSink& s) {
    if (!needs(id)) return;
    Node& n = nodes_[id];
    if (n.grad.size() == 0) {
      n.grad = g;
      return;
    }
    detail::require_same_shape(n.grad, g, "accumulate");
    auto d = n.grad.data();
    auto src = g.data();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += src[i];
    detail::count<T>(s, g.size(), 2 * g.size(), g.size());
  }

  std::vector<Node> nodes_;
};

}  // namespace encdec
