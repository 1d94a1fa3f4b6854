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
#include <string>

#include "encdec/errors.hpp"
#include "encdec/kernels.hpp"

namespace encdec {

// Reserved token ids. Every vocabulary starts with these four.
inline constexpr TokenId kPadToken = 0;
inline constexpr TokenId kBosToken = 1;
inline constexpr TokenId kEosToken = 2;
inline constexpr TokenId kSepToken = 3;
inline constexpr TokenId kFirstFreeToken = 4;

struct ModelConfig {
  std::size_t d_model = 64;
  std::size_t n_heads = 4;
  std::size_t n_enc_layers = 2;
  std::size_t n_dec_layers = 2;
  std::size_t d_ff = 128;
  std::size_t vocab_size = 64;
  std::size_t max_len = 512;

  std::size_t head_dim() const { return d_model / n_heads; }

  void validate() const {
    auto positive = [](std::size_t v, const char* name) {
      if (v < 1) throw ConfigError(std::string(name) + " must be >= 1");
    };
    positive(d_model, "d_model");
    positive(n_heads, "n_heads");
    positive(n_enc_layers, "n_enc_layers");
    positive(n_dec_layers, "n_dec_layers");
    positive(d_ff, "d_ff");
    positive(max_len, "max_len");
    if (d_model % n_heads != 0) {
      throw ConfigError("d_model " + std::to_string(d_model) + " is not divisible by n_heads " +
                        std::to_string(n_heads));
    }
    if (vocab_size <= static_cast<std::size_t>(kFirstFreeToken)) {
      throw ConfigError("vocab_size must exceed the " + std::to_string(kFirstFreeToken) +
                        " reserved tokens");
    }
  }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

}  // namespace encdec
