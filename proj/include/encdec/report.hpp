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

// Report documents and the report join used by the command line.
//
// Every document has three members:
//   header  : artifact, version, kind, run_id, seed, config, hw_profile,
//             timestamp, notes
//   summary : flat scalar fields, the inputs of the report join
//   body    : full results; deterministic for a given seed except for the
//             wall-clock fields of bench documents

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <ctime>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "encdec/config.hpp"
#include "encdec/costmodel.hpp"
#include "encdec/counters.hpp"
#include "encdec/errors.hpp"
#include "json.hpp"

namespace encdec {

using Json = nlohmann::ordered_json;

#ifdef ENCDEC_VERSION
inline constexpr const char* kArtifactVersion = ENCDEC_VERSION;
#else
inline constexpr const char* kArtifactVersion = "0.0.0";
#endif

inline constexpr const char* kArtifactName = "encdec";

inline std::string utc_timestamp() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct DocumentHeader {
  std::string kind;
  std::string run_id;
  std::uint64_t seed = 0;
  Json config = Json::object();
  std::string hw_profile = "none";
  std::vector<std::string> notes;
};

inline Json make_document(const DocumentHeader& h, Json summary, Json body) {
  Json doc;
  doc["header"] = {{"artifact", kArtifactName},
                   {"version", kArtifactVersion},
                   {"kind", h.kind},
                   {"run_id", h.run_id},
                   {"seed", h.seed},
                   {"config", h.config},
                   {"hw_profile", h.hw_profile},
                   {"timestamp", utc_timestamp()},
                   {"notes", h.notes}};
  doc["summary"] = std::move(summary);
  doc["body"] = std::move(body);
  return doc;
}

// ---- serialization of library types ----

inline Json to_json(const ModelConfig& c) {
  return {{"d_model", c.d_model},       {"n_heads", c.n_heads},       {"n_enc_layers", c.n_enc_layers},
          {"n_dec_layers", c.n_dec_layers}, {"d_ff", c.d_ff},         {"vocab_size", c.vocab_size},
          {"max_len", c.max_len}};
}

inline Json to_json(const ShapeParams& s) {
  return {{"U", s.U}, {"b", s.b}, {"n_s", s.n_s}, {"n_t", s.n_t}, {"n_p", s.n_p}, {"d", s.d}, {"h", s.h}};
}

inline Json to_json(const CounterSink& s) {
  return {{"flops", s.flops},
          {"bytes_read", s.bytes_read},
          {"bytes_written", s.bytes_written},
          {"kv_bytes_read", s.kv_bytes_read}};
}

inline Json to_json(const CounterSet& c) {
  Json j = Json::object();
  for (Component comp : kAllComponents) j[std::string(to_string(comp))] = to_json(c.at(comp));
  j["total"] = to_json(c.total());
  return j;
}

// ---- key=value lists ----

// Parses "k=v,k=v" with unsigned integer values. Empty input yields an empty
// list; any malformed item is a usage error.
inline std::vector<std::pair<std::string, std::uint64_t>> parse_kv_list(const std::string& text,
                                                                        const std::string& what) {
  std::vector<std::pair<std::string, std::uint64_t>> out;
  if (text.empty()) return out;
  std::stringstream ss(text);
  std::string item;
  std::set<std::string> seen;
  while (std::getline(ss, item, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == item.size()) {
      throw UsageError(what + ": expected key=value, got '" + item + "'");
    }
    const std::string key = item.substr(0, eq);
    const std::string val = item.substr(eq + 1);
    if (!std::all_of(val.begin(), val.end(), [](unsigned char ch) { return ch >= '0' && ch <= '9'; }) ||
        val.size() > 18) {
      throw UsageError(what + ": value for '" + key + "' must be a non-negative integer, got '" + val + "'");
    }
    if (!seen.insert(key).second) throw UsageError(what + ": duplicate key '" + key + "'");
    out.emplace_back(key, std::stoull(val));
  }
  if (!text.empty() && text.back() == ',') throw UsageError(what + ": trailing comma");
  return out;
}

// Applies shape overrides (keys U, b, n_s, n_t, n_p, d, h) onto `base`.
inline ShapeParams apply_shape(ShapeParams base, const std::string& text) {
  for (const auto& [k, v] : parse_kv_list(text, "shape")) {
    if (k == "U") base.U = v;
    else if (k == "b") base.b = v;
    else if (k == "n_s") base.n_s = v;
    else if (k == "n_t") base.n_t = v;
    else if (k == "n_p") base.n_p = v;
    else if (k == "d") base.d = v;
    else if (k == "h") base.h = v;
    else throw UsageError("shape: unknown key '" + k + "' (keys: U, b, n_s, n_t, n_p, d, h)");
  }
  base.validate();
  return base;
}

inline bool shape_sets(const std::string& text, const std::string& key) {
  for (const auto& kv : parse_kv_list(text, "shape")) {
    if (kv.first == key) return true;
  }
  return false;
}

// Applies model overrides (ModelConfig field names) onto `base`.
inline ModelConfig apply_model(ModelConfig base, const std::string& text) {
  for (const auto& [k, v] : parse_kv_list(text, "model")) {
    const std::size_t n = static_cast<std::size_t>(v);
    if (k == "d_model") base.d_model = n;
    else if (k == "n_heads") base.n_heads = n;
    else if (k == "n_enc_layers") base.n_enc_layers = n;
    else if (k == "n_dec_layers") base.n_dec_layers = n;
    else if (k == "d_ff") base.d_ff = n;
    else if (k == "vocab_size") base.vocab_size = n;
    else if (k == "max_len") base.max_len = n;
    else {
      throw UsageError("model: unknown key '" + k +
                       "' (keys: d_model, n_heads, n_enc_layers, n_dec_layers, d_ff, vocab_size, max_len)");
    }
  }
  try {
    base.validate();
  } catch (const std::exception& e) {
    throw UsageError(std::string("model: ") + e.what());
  }
  return base;
}

inline std::string shape_run_id(const ShapeParams& s) {
  return "U" + std::to_string(s.U) + "-b" + std::to_string(s.b) + "-ns" + std::to_string(s.n_s) + "-nt" +
         std::to_string(s.n_t) + "-np" + std::to_string(s.n_p) + "-d" + std::to_string(s.d) + "-h" +
         std::to_string(s.h);
}

// ---- report join ----

struct ReportColumn {
  const char* name;
  const char* kind;  // source document kind; empty for the key
  const char* field;  // summary field of that kind
};

// Fixed CSV column order. Every column except run_id comes from the summary
// of one document kind; a run without that kind leaves the cell empty.
inline const std::vector<ReportColumn>& report_columns() {
  static const std::vector<ReportColumn> cols = {
      {"run_id", "", ""},
      {"cost_shape", "cost", "shape"},
      {"cost_flop_ratio", "cost", "flop_ratio"},
      {"cost_enc_self_ratio", "cost", "enc_self_operations_ratio"},
      {"cost_dec_cross_memory_ratio", "cost", "dec_cross_memory_ratio"},
      {"bench_shape", "bench", "shape"},
      {"bench_single_speedup", "bench", "single_speedup"},
      {"bench_batched_speedup", "bench", "batched_speedup"},
      {"bench_measured_flop_ratio", "bench", "measured_flop_ratio"},
      {"bench_predicted_flop_ratio", "bench", "predicted_flop_ratio"},
      {"bench_tokens_identical", "bench", "tokens_identical"},
      {"bench_unstable", "bench", "unstable"},
      {"verify_passed", "verify", "passed"},
      {"verify_checks_failed", "verify", "failed"},
      {"verify_checks_total", "verify", "total"},
      {"train_pid_exact_match", "train-toy", "pid_exact_match"},
      {"train_pie_exact_match", "train-toy", "pie_exact_match"},
      {"train_measured_flop_ratio", "train-toy", "measured_flop_ratio"},
      {"train_predicted_flop_ratio", "train-toy", "predicted_flop_ratio"},
  };
  return cols;
}

inline const std::vector<std::string>& report_kinds() {
  static const std::vector<std::string> kinds = {"cost", "bench", "verify", "train-toy"};
  return kinds;
}

struct MergedReport {
  std::vector<std::string> columns;
  std::vector<std::map<std::string, Json>> rows;  // column -> value; absent means empty
  std::vector<std::string> sources;
};

// Joins documents by header.run_id. Two documents of the same kind with the
// same run id are an error; a run id with no document of some kind keeps its
// row with those columns empty.
inline MergedReport merge_documents(const std::vector<std::pair<std::string, Json>>& docs) {
  std::map<std::string, std::map<std::string, const Json*>> by_run;
  for (const auto& [source, doc] : docs) {
    if (!doc.is_object() || !doc.contains("header") || !doc.contains("summary")) {
      throw UsageError(source + ": not an encdec report document");
    }
    const Json& h = doc["header"];
    if (!h.contains("run_id") || !h.contains("kind") || !h["run_id"].is_string() || !h["kind"].is_string()) {
      throw UsageError(source + ": header lacks run_id or kind");
    }
    const std::string kind = h["kind"];
    if (std::find(report_kinds().begin(), report_kinds().end(), kind) == report_kinds().end()) {
      throw UsageError(source + ": cannot merge documents of kind '" + kind + "'");
    }
    const std::string run = h["run_id"];
    auto& slot = by_run[run][kind];
    if (slot) throw UsageError("duplicate run id '" + run + "' for kind '" + kind + "' (" + source + ")");
    slot = &doc["summary"];
  }
  MergedReport m;
  for (const auto& c : report_columns()) m.columns.push_back(c.name);
  for (const auto& [source, doc] : docs) m.sources.push_back(source);
  for (const auto& [run, kinds] : by_run) {
    std::map<std::string, Json> row;
    row["run_id"] = run;
    for (const auto& c : report_columns()) {
      if (!*c.kind) continue;
      auto it = kinds.find(c.kind);
      if (it == kinds.end() || !it->second->contains(c.field)) continue;
      row[c.name] = (*it->second)[c.field];
    }
    m.rows.push_back(std::move(row));
  }
  return m;
}

inline std::string csv_cell(const Json& v) {
  std::string s = v.is_string() ? v.get<std::string>() : v.dump();
  if (s.find_first_of(",\"\n") != std::string::npos) {
    std::string q = "\"";
    for (char ch : s) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
    return q + "\"";
  }
  return s;
}

inline std::string to_csv(const MergedReport& m) {
  std::string out;
  for (std::size_t i = 0; i < m.columns.size(); ++i) out += (i ? "," : "") + m.columns[i];
  out += "\n";
  for (const auto& row : m.rows) {
    for (std::size_t i = 0; i < m.columns.size(); ++i) {
      if (i) out += ",";
      auto it = row.find(m.columns[i]);
      if (it != row.end() && !it->second.is_null()) out += csv_cell(it->second);
    }
    out += "\n";
  }
  return out;
}

// Same fields as the CSV; empty cells become null.
inline Json to_json(const MergedReport& m) {
  Json rows = Json::array();
  for (const auto& row : m.rows) {
    Json r = Json::object();
    for (const auto& c : m.columns) {
      auto it = row.find(c);
      r[c] = it == row.end() ? Json() : it->second;
    }
    rows.push_back(std::move(r));
  }
  return {{"columns", m.columns}, {"rows", rows}};
}

inline Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open " + path);
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw UsageError(path + ": invalid JSON: " + e.what());
  }
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UsageError("cannot write " + path);
  out << text;
  if (!out) throw UsageError("write failed: " + path);
}

}  // namespace encdec
