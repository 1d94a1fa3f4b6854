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

// Closed-form memory-access and operation counts of the three attention
// components for PiE and PiD, and the inverse operational intensities
// derived from them.
//
// Units: memory is a count of scalar symbols read (multiply by
// kBytesPerSymbol for f32 bytes); operations count the projection
// multiply-adds of all heads jointly (multiply by kFlopsPerOperation for
// flops). Decoder rows are totals over n_t steps. Constant factors (the number
// of projections, layers) are dropped, as is the attention-score work.

#include <cstdint>
#include <string>

#include "encdec/engines.hpp"
#include "encdec/errors.hpp"

namespace encdec {

inline constexpr std::uint64_t kBytesPerSymbol = 4;
inline constexpr std::uint64_t kFlopsPerOperation = 2;

struct ShapeParams {
  std::uint64_t U = 1;    // prompts per input
  std::uint64_t b = 1;    // batch size
  std::uint64_t n_s = 1;  // input length
  std::uint64_t n_t = 1;  // output length
  std::uint64_t n_p = 0;  // prompt length
  std::uint64_t d = 64;   // hidden size
  std::uint64_t h = 1;    // heads

  void validate() const {
    auto positive = [](std::uint64_t v, const char* name) {
      if (v < 1) throw UsageError(std::string(name) + " must be >= 1");
    };
    positive(U, "U");
    positive(b, "b");
    positive(n_s, "n_s");
    positive(n_t, "n_t");
    positive(d, "d");
    positive(h, "h");
    if (d % h != 0) throw UsageError("h must divide d");
  }

  friend bool operator==(const ShapeParams&, const ShapeParams&) = default;
};

enum class CostMode {
  table1,      // prompt terms dropped
  appendix_b,  // prompt terms retained
};

constexpr const char* to_string(CostMode m) noexcept {
  return m == CostMode::table1 ? "table1" : "appendixB";
}

struct CostCell {
  std::uint64_t memory = 0;
  std::uint64_t operations = 0;

  double inverse_intensity() const {
    return static_cast<double>(memory) / static_cast<double>(operations);
  }
  friend bool operator==(const CostCell&, const CostCell&) = default;
};

struct CostBreakdown {
  ShapeParams shape;
  EngineKind config = EngineKind::pie;
  CostMode mode = CostMode::table1;
  CostCell enc_self;
  CostCell dec_self;
  CostCell dec_self_prompt;   // PiD, appendix_b only
  CostCell dec_cross;         // PiE: whole; PiD: output tokens
  CostCell dec_cross_prompt;  // PiD, appendix_b only

  CostCell total() const {
    CostCell t;
    for (const CostCell* c : {&enc_self, &dec_self, &dec_self_prompt, &dec_cross, &dec_cross_prompt}) {
      t.memory += c->memory;
      t.operations += c->operations;
    }
    return t;
  }
};

inline CostBreakdown table1_counts(const ShapeParams& s, EngineKind config,
                                   CostMode mode = CostMode::table1) {
  s.validate();
  const std::uint64_t U = s.U, b = s.b, n_s = s.n_s, n_t = s.n_t, n_p = s.n_p, d = s.d;
  const std::uint64_t d2 = d * d;
  const bool prompts = mode == CostMode::appendix_b;
  CostBreakdown c;
  c.shape = s;
  c.config = config;
  c.mode = mode;
  if (config == EngineKind::pie) {
    const std::uint64_t len = prompts ? n_s + n_p : n_s;
    c.enc_self = {U * b * len * d + d2, U * b * len * d2};
    c.dec_cross = {U * b * len * n_t * d + U * b * n_t * d + n_t * d2, U * b * n_t * d2};
  } else {
    c.enc_self = {b * n_s * d + d2, b * n_s * d2};
    c.dec_cross = {b * n_s * n_t * d + U * b * n_t * d + n_t * d2, U * b * n_t * d2};
    if (prompts && n_p > 0) {
      c.dec_self_prompt = {U * b * n_p * d + d2, U * b * n_p * d2};
      c.dec_cross_prompt = {b * n_s * d + U * b * n_p * d + d2, U * b * n_p * d2};
    }
  }
  c.dec_self = {U * b * n_t * n_t * d + n_t * d2, U * b * n_t * d2};
  return c;
}

enum class AttentionPart {
  enc_self,
  dec_self,
  dec_self_prompt,
  dec_cross,
  dec_cross_prompt,
  dec_cross_output,
};

constexpr const char* to_string(AttentionPart p) noexcept {
  switch (p) {
    case AttentionPart::enc_self: return "enc_self";
    case AttentionPart::dec_self: return "dec_self";
    case AttentionPart::dec_self_prompt: return "dec_self_prompt";
    case AttentionPart::dec_cross: return "dec_cross";
    case AttentionPart::dec_cross_prompt: return "dec_cross_prompt";
    case AttentionPart::dec_cross_output: return "dec_cross_output";
  }
  return "?";
}

// Whether `part` has an inverse-intensity formula under `config`. Prompt-side
// parts exist only for PiD; PiD's cross-attention is split into prompt and
// output parts; PiD's output self-attention equals PiE's dec_self.
constexpr bool has_formula(AttentionPart part, EngineKind config) noexcept {
  switch (part) {
    case AttentionPart::enc_self:
    case AttentionPart::dec_self: return true;
    case AttentionPart::dec_cross: return config == EngineKind::pie;
    case AttentionPart::dec_self_prompt:
    case AttentionPart::dec_cross_prompt:
    case AttentionPart::dec_cross_output: return config == EngineKind::pid;
  }
  return false;
}

// Inverse operational intensity R = memory / operations; lower R means
// higher operational intensity.
inline double inverse_intensity(const ShapeParams& s, AttentionPart part, EngineKind config) {
  s.validate();
  if (!has_formula(part, config)) {
    throw UsageError(std::string("no inverse-intensity formula for ") + to_string(part) +
                     " under " + to_string(config));
  }
  const double U = static_cast<double>(s.U), b = static_cast<double>(s.b);
  const double n_s = static_cast<double>(s.n_s), n_t = static_cast<double>(s.n_t);
  const double n_p = static_cast<double>(s.n_p), d = static_cast<double>(s.d);
  const bool pie = config == EngineKind::pie;
  auto need_prompt = [&] {
    if (s.n_p == 0) throw UsageError(std::string(to_string(part)) + " requires n_p >= 1");
  };
  switch (part) {
    case AttentionPart::enc_self:
      return pie ? 1.0 / d + 1.0 / (U * b * (n_s + n_p)) : 1.0 / d + 1.0 / (b * n_s);
    case AttentionPart::dec_self:
      return n_t / d + 1.0 / (U * b);
    case AttentionPart::dec_self_prompt:
      need_prompt();
      return 1.0 / d + 1.0 / (U * b * n_p);
    case AttentionPart::dec_cross:
      return (n_s + n_p + 1.0) / d + 1.0 / (U * b);
    case AttentionPart::dec_cross_prompt:
      need_prompt();
      return (1.0 / d) * (n_s / (U * n_p) + 1.0) + 1.0 / (U * b * n_p);
    case AttentionPart::dec_cross_output:
      return (1.0 / d) * (n_s / U + 1.0) + 1.0 / (U * b);
  }
  return 0.0;
}

// The same ratio obtained from the appendix_b counts (memory / operations).
inline double count_ratio(const ShapeParams& s, AttentionPart part, EngineKind config) {
  if (!has_formula(part, config)) {
    throw UsageError(std::string("no count for ") + to_string(part) + " under " +
                     to_string(config));
  }
  const CostBreakdown c = table1_counts(s, config, CostMode::appendix_b);
  switch (part) {
    case AttentionPart::enc_self: return c.enc_self.inverse_intensity();
    case AttentionPart::dec_self: return c.dec_self.inverse_intensity();
    case AttentionPart::dec_self_prompt: return c.dec_self_prompt.inverse_intensity();
    case AttentionPart::dec_cross:
    case AttentionPart::dec_cross_output: return c.dec_cross.inverse_intensity();
    case AttentionPart::dec_cross_prompt: return c.dec_cross_prompt.inverse_intensity();
  }
  return 0.0;
}

}  // namespace encdec
