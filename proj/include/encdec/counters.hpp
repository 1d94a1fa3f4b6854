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

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace encdec {

// Cumulative arithmetic and memory-traffic counts reported by kernels.
//
// `kv_bytes_read` is the subset of `bytes_read` spent reading attention
// key/value operands (K and V of each head). It lets callers isolate the
// traffic that cross-attention sharing saves.
struct CounterSink {
  std::uint64_t flops = 0;
  std::uint64_t bytes_read = 0;
  std::uint64_t bytes_written = 0;
  std::uint64_t kv_bytes_read = 0;

  std::uint64_t bytes() const noexcept { return bytes_read + bytes_written; }

  CounterSink& operator+=(const CounterSink& o) noexcept {
    flops += o.flops;
    bytes_read += o.bytes_read;
    bytes_written += o.bytes_written;
    kv_bytes_read += o.kv_bytes_read;
    return *this;
  }
  friend CounterSink operator+(CounterSink a, const CounterSink& b) noexcept { return a += b; }
  friend bool operator==(const CounterSink&, const CounterSink&) = default;
};

enum class Component : std::uint8_t {
  encoder_self,
  decoder_self,
  decoder_cross,
  feed_forward,
  embedding,
  other,
};

inline constexpr std::array<Component, 6> kAllComponents = {
    Component::encoder_self, Component::decoder_self, Component::decoder_cross,
    Component::feed_forward, Component::embedding,    Component::other,
};

constexpr std::string_view to_string(Component c) noexcept {
  switch (c) {
    case Component::encoder_self: return "encoder_self";
    case Component::decoder_self: return "decoder_self";
    case Component::decoder_cross: return "decoder_cross";
    case Component::feed_forward: return "feed_forward";
    case Component::embedding: return "embedding";
    case Component::other: return "other";
  }
  return "other";
}

inline Component component_from_string(std::string_view s) {
  for (Component c : kAllComponents) {
    if (to_string(c) == s) return c;
  }
  throw std::invalid_argument("unknown component label: " + std::string(s));
}

// Per-component counters for one run. Single owner; merge explicitly.
class CounterSet {
 public:
  CounterSink& at(Component c) noexcept { return sinks_[static_cast<std::size_t>(c)]; }
  const CounterSink& at(Component c) const noexcept {
    return sinks_[static_cast<std::size_t>(c)];
  }

  CounterSink total() const noexcept {
    CounterSink t;
    for (const auto& s : sinks_) t += s;
    return t;
  }

  CounterSet& merge(const CounterSet& o) noexcept {
    for (std::size_t i = 0; i < sinks_.size(); ++i) sinks_[i] += o.sinks_[i];
    return *this;
  }

  void reset() noexcept { sinks_ = {}; }

  friend bool operator==(const CounterSet&, const CounterSet&) = default;

 private:
  std::array<CounterSink, kAllComponents.size()> sinks_{};
};

inline CounterSet merged(CounterSet a, const CounterSet& b) { return a.merge(b); }

}  // namespace encdec
