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

// Measured operational intensity and analytic-vs-measured comparison.

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "encdec/costmodel.hpp"
#include "encdec/counters.hpp"
#include "encdec/errors.hpp"

namespace encdec {

// Flops per byte moved (read + written).
inline double measured_intensity(const CounterSink& s, const std::string& what = "run") {
  if (s.bytes() == 0) throw UndefinedIntensityError(what + ": zero bytes moved");
  return static_cast<double>(s.flops) / static_cast<double>(s.bytes());
}

inline double measured_intensity(const CounterSet& c, Component comp) {
  return measured_intensity(c.at(comp), std::string(to_string(comp)));
}

inline double measured_intensity(const CounterSet& c) { return measured_intensity(c.total(), "total"); }

inline double relative_deviation(double analytic, double measured) {
  return std::abs(analytic - measured) / std::max(measured, 1.0);
}

// Table operations count multiply-adds of one projection per layer; kernel
// counters book 2 flops per multiply-add, four projections (Q, K, V, O) per
// attention block, in every layer.
inline constexpr std::uint64_t kProjectionsPerAttention = 4;

// Counters from one engine run together with the shape and depth that
// produced them.
struct MeasuredRun {
  ShapeParams shape;
  EngineKind config = EngineKind::pie;
  std::size_t enc_layers = 1;
  std::size_t dec_layers = 1;
  CounterSet counters;
};

struct DeviationRow {
  std::string component;
  std::optional<double> analytic;
  std::optional<double> measured;
  double deviation = 0.0;
  bool passed = false;
  bool missing = false;  // one side has no value; never passes
};

struct DeviationReport {
  EngineKind config = EngineKind::pie;
  CostMode mode = CostMode::table1;
  double threshold = 0.0;
  std::vector<DeviationRow> rows;

  bool passed() const {
    for (const auto& r : rows) {
      if (!r.passed) return false;
    }
    return !rows.empty();
  }
};

inline DeviationRow make_row(std::string name, std::optional<double> analytic,
                             std::optional<double> measured, double threshold) {
  DeviationRow r;
  r.component = std::move(name);
  r.analytic = analytic;
  r.measured = measured;
  if (!analytic || !measured) {
    r.missing = true;
    return r;
  }
  r.deviation = relative_deviation(*analytic, *measured);
  r.passed = r.deviation <= threshold;
  return r;
}

// One row per attention component: analytic operations scaled to flops
// against the component's measured kernel flops.
inline DeviationReport compare(const CostBreakdown& analytic, const MeasuredRun& measured,
                               double threshold) {
  if (!(analytic.shape == measured.shape) || analytic.config != measured.config) {
    throw UsageError("compare: analytic and measured runs describe different shapes or configs");
  }
  DeviationReport rep;
  rep.config = analytic.config;
  rep.mode = analytic.mode;
  rep.threshold = threshold;
  auto flops_of = [](std::uint64_t ops, std::size_t layers) -> std::optional<double> {
    if (ops == 0) return std::nullopt;
    return static_cast<double>(ops * kFlopsPerOperation * kProjectionsPerAttention * layers);
  };
  auto measured_of = [&](Component c) -> std::optional<double> {
    const std::uint64_t f = measured.counters.at(c).flops;
    if (f == 0) return std::nullopt;
    return static_cast<double>(f);
  };
  rep.rows.push_back(make_row("encoder_self", flops_of(analytic.enc_self.operations, measured.enc_layers),
                              measured_of(Component::encoder_self), threshold));
  rep.rows.push_back(make_row(
      "decoder_self",
      flops_of(analytic.dec_self.operations + analytic.dec_self_prompt.operations, measured.dec_layers),
      measured_of(Component::decoder_self), threshold));
  rep.rows.push_back(make_row(
      "decoder_cross",
      flops_of(analytic.dec_cross.operations + analytic.dec_cross_prompt.operations, measured.dec_layers),
      measured_of(Component::decoder_cross), threshold));
  return rep;
}

}  // namespace encdec
