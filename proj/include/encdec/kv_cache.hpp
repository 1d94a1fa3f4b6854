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

#include <cstddef>
#include <vector>

#include "encdec/matrix.hpp"

namespace encdec {

template <typename T>
struct LayerKv {
  BasicMatrix<T> k, v;
};

// Self-attention cache of one decode stream: one K/V pair per decoder layer.
template <typename T>
struct StreamCache {
  std::vector<LayerKv<T>> layers;
  std::size_t length = 0;

  explicit StreamCache(std::size_t n_layers = 0) : layers(n_layers) {}
};

// Cross-attention K/V projections of one encoder output M, per decoder layer.
template <typename T>
struct CrossKv {
  std::vector<LayerKv<T>> layers;

  std::size_t length() const { return layers.empty() ? 0 : layers.front().k.rows(); }
};

// All mutable decoding state of one run. Stream s attends to
// cross[cross_of_stream[s]]; several streams may share one entry.
template <typename T>
struct BasicKVCacheSet {
  std::vector<StreamCache<T>> self;
  std::vector<CrossKv<T>> cross;
  std::vector<std::size_t> cross_of_stream;

  std::size_t add_stream(std::size_t n_layers, std::size_t cross_index) {
    self.emplace_back(n_layers);
    cross_of_stream.push_back(cross_index);
    return self.size() - 1;
  }

  std::size_t cross_bytes() const {
    std::size_t n = 0;
    for (const auto& c : cross) {
      for (const auto& l : c.layers) n += (l.k.size() + l.v.size()) * sizeof(T);
    }
    return n;
  }

  std::size_t self_bytes() const {
    std::size_t n = 0;
    for (const auto& s : self) {
      for (const auto& l : s.layers) n += (l.k.size() + l.v.size()) * sizeof(T);
    }
    return n;
  }
};

using KVCacheSet = BasicKVCacheSet<float>;

}  // namespace encdec
