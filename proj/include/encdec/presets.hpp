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

// Workload presets built from dataset mean shapes, and the analytic model
// sizes used to evaluate them. Presets fix shapes, not corpora.

#include <string>
#include <vector>

#include "encdec/config.hpp"
#include "encdec/costmodel.hpp"
#include "encdec/errors.hpp"

namespace encdec {

struct Preset {
  std::string name;
  ShapeParams shape;
  double reported_ratio_low;   // published PiD/PiE FLOP ratio range
  double reported_ratio_high;
  double accept_low;           // acceptance band for flop_ratio
  double accept_high;
  std::string note;
};

// 12+12 layer analytic model with d=768 (the shape's d/h override it).
inline ModelConfig t5_base_config() {
  ModelConfig c;
  c.d_model = 768;
  c.n_heads = 12;
  c.n_enc_layers = 12;
  c.n_dec_layers = 12;
  c.d_ff = 3072;
  c.vocab_size = 32128;
  c.max_len = 4096;
  return c;
}

inline std::vector<Preset> presets() {
  // U, b, n_s, n_t, n_p, d, h
  return {
      {"multiwoz", {30, 1, 289, 24, 8, 768, 12}, 0.1, 0.1, 0.05, 0.2,
       "30 slot prompts; per-slot output capped at 24 tokens"},
      {"multiwoz-domain", {5, 1, 289, 24, 8, 768, 12}, 0.1, 0.1, 0.0, 1.0,
       "5 domain prompts; no acceptance band"},
      {"aci-bench", {4, 1, 1725, 173, 6, 768, 12}, 0.4, 0.4, 0.3, 0.5,
       "4 section prompts; the 693-token note split across sections"},
      {"radqa", {4, 1, 137, 28, 36, 768, 12}, 0.5, 0.6, 0.4, 0.75,
       "4 free-form questions per report"},
  };
}

inline std::string preset_names() {
  std::string s;
  for (const auto& p : presets()) s += (s.empty() ? "" : ", ") + p.name;
  return s;
}

inline Preset find_preset(const std::string& name) {
  for (const auto& p : presets()) {
    if (p.name == name) return p;
  }
  throw UsageError("unknown preset '" + name + "' (available: " + preset_names() + ")");
}

}  // namespace encdec
