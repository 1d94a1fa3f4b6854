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

// Roofline time estimates: each component takes
//   max(operations * kFlopsPerOperation / peak, memory * kBytesPerSymbol / bandwidth)
// seconds, and the total is their sum.
//
// Profile files are plain key=value lines; '#' starts a comment:
//   name = a100-as-printed
//   peak_flops_per_s = 312e12
//   mem_bytes_per_s = 2e9

#include <algorithm>
#include <cctype>
#include <fstream>
#include <istream>
#include <sstream>
#include <string>
#include <vector>

#include "encdec/costmodel.hpp"
#include "encdec/errors.hpp"

namespace encdec {

struct HardwareProfile {
  std::string name;
  double peak_flops_per_s = 0.0;
  double mem_bytes_per_s = 0.0;

  void validate() const {
    if (!(peak_flops_per_s > 0.0) || !(mem_bytes_per_s > 0.0)) {
      throw UsageError("hardware profile '" + name + "' needs positive peak_flops_per_s and mem_bytes_per_s");
    }
  }

  // Inverse intensity R above which a component is memory-bound.
  double balance_inverse_intensity() const {
    return static_cast<double>(kFlopsPerOperation) * mem_bytes_per_s /
           (static_cast<double>(kBytesPerSymbol) * peak_flops_per_s);
  }
};

// The A100 figures exactly as printed, including the 2 GB/s bandwidth.
inline HardwareProfile a100_as_printed() { return {"a100-as-printed", 312e12, 2e9}; }

// The same compute peak with a vendor-sheet bandwidth, for comparison.
inline HardwareProfile a100_datasheet() { return {"a100-datasheet", 312e12, 2.0e12}; }

inline std::vector<HardwareProfile> builtin_profiles() { return {a100_as_printed(), a100_datasheet()}; }

inline HardwareProfile builtin_profile(const std::string& name) {
  for (auto& p : builtin_profiles()) {
    if (p.name == name) return p;
  }
  throw UsageError("unknown hardware profile '" + name + "'");
}

namespace detail {

inline std::string trim(const std::string& s) {
  auto b = std::find_if_not(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
  auto e = std::find_if_not(s.rbegin(), s.rend(), [](unsigned char c) { return std::isspace(c); });
  return b < e.base() ? std::string(b, e.base()) : std::string();
}

inline double parse_positive(const std::string& key, const std::string& value) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(value, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != value.size()) throw UsageError("profile: bad number for " + key + ": '" + value + "'");
  return v;
}

}  // namespace detail

inline HardwareProfile parse_hardware_profile(std::istream& in) {
  HardwareProfile p;
  bool have_peak = false, have_bw = false;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageError("profile line " + std::to_string(lineno) + ": expected key=value");
    }
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (key == "name") {
      p.name = value;
    } else if (key == "peak_flops_per_s") {
      p.peak_flops_per_s = detail::parse_positive(key, value);
      have_peak = true;
    } else if (key == "mem_bytes_per_s") {
      p.mem_bytes_per_s = detail::parse_positive(key, value);
      have_bw = true;
    } else {
      throw UsageError("profile line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
  }
  if (!have_peak || !have_bw) throw UsageError("profile: peak_flops_per_s and mem_bytes_per_s are required");
  if (p.name.empty()) p.name = "unnamed";
  p.validate();
  return p;
}

inline HardwareProfile parse_hardware_profile(const std::string& text) {
  std::istringstream in(text);
  return parse_hardware_profile(in);
}

inline HardwareProfile load_hardware_profile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open hardware profile " + path);
  return parse_hardware_profile(in);
}

struct ComponentTime {
  double compute_s = 0.0;
  double memory_s = 0.0;
  double seconds() const { return std::max(compute_s, memory_s); }
  bool memory_bound() const { return memory_s > compute_s; }
};

struct RooflineEstimate {
  std::string profile;
  ComponentTime enc_self, dec_self, dec_self_prompt, dec_cross, dec_cross_prompt;

  double total_seconds() const {
    return enc_self.seconds() + dec_self.seconds() + dec_self_prompt.seconds() +
           dec_cross.seconds() + dec_cross_prompt.seconds();
  }
};

inline ComponentTime roofline_time(const CostCell& c, const HardwareProfile& hw) {
  return {static_cast<double>(c.operations) * static_cast<double>(kFlopsPerOperation) / hw.peak_flops_per_s,
          static_cast<double>(c.memory) * static_cast<double>(kBytesPerSymbol) / hw.mem_bytes_per_s};
}

inline RooflineEstimate roofline_estimate(const CostBreakdown& cost, const HardwareProfile& hw) {
  hw.validate();
  RooflineEstimate r;
  r.profile = hw.name;
  r.enc_self = roofline_time(cost.enc_self, hw);
  r.dec_self = roofline_time(cost.dec_self, hw);
  r.dec_self_prompt = roofline_time(cost.dec_self_prompt, hw);
  r.dec_cross = roofline_time(cost.dec_cross, hw);
  r.dec_cross_prompt = roofline_time(cost.dec_cross_prompt, hw);
  return r;
}

}  // namespace encdec
