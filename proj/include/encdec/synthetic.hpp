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

// Synthetic decomposable task. X lists U key/value pairs in random order:
//   k_a v_a.. k_b v_b.. ...
// prompt Z_u is the single key token of subtask u, and Y_u is that key's
// value span followed by EOS. Keys are the U lowest free token ids; values
// are drawn from the remaining ids.

#include <algorithm>
#include <cstdint>
#include <random>
#include <unordered_set>
#include <vector>

#include "encdec/config.hpp"
#include "encdec/engines.hpp"
#include "encdec/errors.hpp"

namespace encdec {

struct SyntheticExample {
  Instance instance;
  std::vector<TokenSeq> targets;  // Y_u, each ending in EOS
};

struct SyntheticTask {
  std::size_t num_prompts = 0;
  std::size_t value_len = 0;
  std::vector<SyntheticExample> train;
  std::vector<SyntheticExample> heldout;
};

// Fraction of instances (by input hash) placed in the held-out split.
inline constexpr std::uint64_t kHeldoutModulus = 5;

inline std::uint64_t sequence_hash(const TokenSeq& seq) {
  std::uint64_t h = 1469598103934665603ull;
  for (TokenId t : seq) {
    for (int b = 0; b < 4; ++b) {
      h ^= (static_cast<std::uint32_t>(t) >> (8 * b)) & 0xffu;
      h *= 1099511628211ull;
    }
  }
  return h;
}

inline bool is_heldout(const Instance& inst) { return sequence_hash(inst.input) % kHeldoutModulus == 0; }

// `n_s` must be a multiple of U with at least one value token per pair.
// Duplicate inputs are dropped so the two splits never share an instance.
inline SyntheticTask make_synthetic_task(std::uint64_t seed, std::size_t U, std::size_t n_s,
                                         std::size_t vocab, std::size_t instances) {
  if (U == 0 || n_s % U != 0 || n_s / U < 2) {
    throw UsageError("synthetic task needs n_s = U * (1 + value_len) with value_len >= 1");
  }
  const auto first_value = kFirstFreeToken + static_cast<TokenId>(U);
  if (vocab <= static_cast<std::size_t>(first_value) + 1) {
    throw UsageError("synthetic task vocabulary too small for " + std::to_string(U) + " keys");
  }
  SyntheticTask task;
  task.num_prompts = U;
  task.value_len = n_s / U - 1;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<TokenId> value(first_value, static_cast<TokenId>(vocab - 1));
  std::unordered_set<std::uint64_t> seen;
  std::size_t attempts = 0;
  while (task.train.size() + task.heldout.size() < instances) {
    if (++attempts > 100 * instances) throw UsageError("synthetic task: too few distinct inputs");
    std::vector<TokenId> keys(U);
    for (std::size_t u = 0; u < U; ++u) keys[u] = kFirstFreeToken + static_cast<TokenId>(u);
    std::vector<TokenId> order = keys;
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<TokenSeq> values(U);
    for (auto& v : values) {
      v.resize(task.value_len);
      for (auto& t : v) t = value(rng);
    }
    SyntheticExample ex;
    for (TokenId k : order) {
      ex.instance.input.push_back(k);
      const auto& v = values[static_cast<std::size_t>(k - kFirstFreeToken)];
      ex.instance.input.insert(ex.instance.input.end(), v.begin(), v.end());
    }
    const std::uint64_t h = sequence_hash(ex.instance.input);
    if (!seen.insert(h).second) continue;
    for (std::size_t u = 0; u < U; ++u) {
      ex.instance.prompts.push_back({keys[u]});
      TokenSeq y = values[u];
      y.push_back(kEosToken);
      ex.targets.push_back(std::move(y));
    }
    (is_heldout(ex.instance) ? task.heldout : task.train).push_back(std::move(ex));
  }
  return task;
}

inline Workload to_workload(const std::vector<SyntheticExample>& examples, std::size_t max_new) {
  Workload wl;
  wl.max_new_tokens = max_new;
  for (const auto& ex : examples) wl.instances.push_back(ex.instance);
  return wl;
}

// Fraction of (instance, prompt) streams decoded exactly, EOS included.
inline double exact_match(const Model& model, const std::vector<SyntheticExample>& examples,
                          EngineKind kind, std::size_t batch = 16) {
  if (examples.empty()) return 0.0;
  std::size_t hits = 0, total = 0;
  for (std::size_t first = 0; first < examples.size(); first += batch) {
    const std::size_t last = std::min(examples.size(), first + batch);
    const std::vector<SyntheticExample> chunk(examples.begin() + first, examples.begin() + last);
    const std::size_t max_new = chunk.front().targets.front().size();
    const DecodeResult r = infer(kind, model, to_workload(chunk, max_new));
    for (std::size_t i = 0; i < chunk.size(); ++i) {
      for (std::size_t u = 0; u < chunk[i].targets.size(); ++u) {
        hits += r.outputs[i][u] == chunk[i].targets[u];
        ++total;
      }
    }
  }
  return static_cast<double>(hits) / static_cast<double>(total);
}

}  // namespace encdec
