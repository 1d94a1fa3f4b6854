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

// encdec: cost tables, paired engine benchmarks, verification, toy training
// and report joins.
//
// Exit codes: 0 success, 1 check failure, 2 usage error, 3 resource guard.

#include <cstdio>
#include <cstdlib>
#include <future>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "encdec/bench.hpp"
#include "encdec/checks.hpp"
#include "encdec/costmodel.hpp"
#include "encdec/flop_model.hpp"
#include "encdec/presets.hpp"
#include "encdec/report.hpp"
#include "encdec/roofline.hpp"
#include "encdec/training.hpp"

namespace {

using namespace encdec;

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitUsage = 2;
constexpr int kExitResource = 3;

constexpr const char* kOutputDirEnv = "ENCDEC_OUTPUT_DIR";
constexpr const char* kSyntheticNote =
    "instances are synthetic token sequences of the stated shape, not corpus samples";

struct CommonOptions {
  std::string preset;
  std::string shape;
  std::string model;
  std::string engine = "both";
  std::uint64_t seed = 0;
  bool json = false;
  std::string out;
  std::string run_id;
};

struct Engines {
  bool pie = true;
  bool pid = true;
  std::vector<EngineKind> list() const {
    std::vector<EngineKind> v;
    if (pie) v.push_back(EngineKind::pie);
    if (pid) v.push_back(EngineKind::pid);
    return v;
  }
};

Engines parse_engines(const std::string& s) {
  if (s == "both") return {true, true};
  if (s == "pie" || s == "PiE") return {true, false};
  if (s == "pid" || s == "PiD") return {false, true};
  throw UsageError("--engine must be pie, pid or both, got '" + s + "'");
}

void add_common(CLI::App* app, CommonOptions& o, bool shapes) {
  if (shapes) {
    app->add_option("--preset", o.preset, "workload preset (" + preset_names() + ")");
    app->add_option("--shape", o.shape, "shape overrides, k=v list over U,b,n_s,n_t,n_p,d,h");
  }
  app->add_option("--engine", o.engine, "pie, pid or both")->capture_default_str();
  app->add_option("--seed", o.seed, "seed")->capture_default_str();
  app->add_flag("--json", o.json, "print the JSON document instead of text");
  app->add_option("--out", o.out, "write the JSON document to this path");
  app->add_option("--run-id", o.run_id, "run id used by the report join");
}

std::string default_run_id(const CommonOptions& o, const std::string& fallback) {
  if (!o.run_id.empty()) return o.run_id;
  return fallback + "-s" + std::to_string(o.seed);
}

// Writes the document to --out, or to $ENCDEC_OUTPUT_DIR/<kind>-<run_id>.json
// when that is set, and prints it with --json.
void emit(const CommonOptions& o, const Json& doc) {
  const std::string text = doc.dump(2) + "\n";
  std::string path = o.out;
  if (path.empty()) {
    if (const char* dir = std::getenv(kOutputDirEnv); dir && *dir) {
      path = std::string(dir) + "/" + doc["header"]["kind"].get<std::string>() + "-" +
             doc["header"]["run_id"].get<std::string>() + ".json";
    }
  }
  if (!path.empty()) write_text_file(path, text);
  if (o.json) std::cout << text;
}

void say(const CommonOptions& o, const std::string& line) {
  if (!o.json) std::cout << line << "\n";
}

std::string fmt(double v, int precision = 4) { return format_double(v, precision); }

// ---------------------------------------------------------------- cost

const ShapeParams kDefaultCostShape{1, 1, 128, 16, 0, 768, 12};

struct CostOptions {
  CommonOptions common;
  std::string hw_profile;
};

Json cell_json(const CostCell& c) {
  Json j{{"memory", c.memory}, {"operations", c.operations}};
  j["inverse_intensity"] = c.operations ? Json(c.inverse_intensity()) : Json();
  return j;
}

Json breakdown_json(const CostBreakdown& b) {
  return {{"enc_self", cell_json(b.enc_self)},
          {"dec_self", cell_json(b.dec_self)},
          {"dec_self_prompt", cell_json(b.dec_self_prompt)},
          {"dec_cross", cell_json(b.dec_cross)},
          {"dec_cross_prompt", cell_json(b.dec_cross_prompt)},
          {"total", cell_json(b.total())}};
}

Json time_json(const ComponentTime& t) {
  return {{"compute_s", t.compute_s},
          {"memory_s", t.memory_s},
          {"seconds", t.seconds()},
          {"memory_bound", t.memory_bound()}};
}

Json roofline_json(const RooflineEstimate& r) {
  return {{"enc_self", time_json(r.enc_self)},
          {"dec_self", time_json(r.dec_self)},
          {"dec_self_prompt", time_json(r.dec_self_prompt)},
          {"dec_cross", time_json(r.dec_cross)},
          {"dec_cross_prompt", time_json(r.dec_cross_prompt)},
          {"total_seconds", r.total_seconds()}};
}

double safe_ratio(std::uint64_t a, std::uint64_t b) {
  return b ? static_cast<double>(a) / static_cast<double>(b) : 0.0;
}

int cmd_cost(const CostOptions& co) {
  const CommonOptions& o = co.common;
  const Engines engines = parse_engines(o.engine);
  std::optional<Preset> preset;
  ShapeParams base = kDefaultCostShape;
  if (!o.preset.empty()) {
    preset = find_preset(o.preset);
    base = preset->shape;
  }
  const ShapeParams s = apply_shape(base, o.shape);
  ModelConfig model = t5_base_config();
  model.d_model = s.d;
  model.n_heads = s.h;
  model = apply_model(model, o.model);
  if (model.d_model != s.d || model.n_heads != s.h) {
    throw UsageError("model: d_model and n_heads come from the shape keys d and h");
  }

  std::vector<HardwareProfile> profiles = builtin_profiles();
  if (!co.hw_profile.empty()) profiles.push_back(load_hardware_profile(co.hw_profile));

  const double ratio = flop_ratio(s, model);
  Json body;
  body["shape"] = to_json(s);
  body["flop_model"] = to_json(model);
  body["flop_ratio"] = ratio;
  Json tables = Json::object();
  Json roofline = Json::object();
  for (CostMode mode : {CostMode::table1, CostMode::appendix_b}) {
    Json t = Json::object();
    Json r = Json::object();
    for (EngineKind k : engines.list()) {
      const CostBreakdown b = table1_counts(s, k, mode);
      t[to_string(k)] = breakdown_json(b);
      Json per = Json::object();
      for (const auto& hw : profiles) per[hw.name] = roofline_json(roofline_estimate(b, hw));
      r[to_string(k)] = per;
    }
    tables[to_string(mode)] = t;
    roofline[to_string(mode)] = r;
  }
  body["tables"] = tables;

  Json formulas = Json::object();
  for (EngineKind k : engines.list()) {
    Json f = Json::object();
    for (AttentionPart p : {AttentionPart::enc_self, AttentionPart::dec_self, AttentionPart::dec_self_prompt,
                            AttentionPart::dec_cross, AttentionPart::dec_cross_prompt,
                            AttentionPart::dec_cross_output}) {
      if (!has_formula(p, k)) continue;
      const bool prompt_part = p == AttentionPart::dec_self_prompt || p == AttentionPart::dec_cross_prompt;
      if (prompt_part && s.n_p == 0) {
        f[to_string(p)] = Json();
        continue;
      }
      f[to_string(p)] = {{"formula", inverse_intensity(s, p, k)}, {"count_ratio", count_ratio(s, p, k)}};
    }
    formulas[to_string(k)] = f;
  }
  body["inverse_intensity"] = formulas;
  Json profs = Json::array();
  for (const auto& hw : profiles) {
    profs.push_back({{"name", hw.name},
                     {"peak_flops_per_s", hw.peak_flops_per_s},
                     {"mem_bytes_per_s", hw.mem_bytes_per_s},
                     {"balance_inverse_intensity", hw.balance_inverse_intensity()}});
  }
  body["hardware_profiles"] = profs;
  body["roofline"] = roofline;

  Json summary;
  summary["shape"] = shape_run_id(s);
  summary["flop_ratio"] = ratio;
  const CostBreakdown pie1 = table1_counts(s, EngineKind::pie);
  const CostBreakdown pid1 = table1_counts(s, EngineKind::pid);
  summary["enc_self_operations_ratio"] = safe_ratio(pid1.enc_self.operations, pie1.enc_self.operations);
  summary["dec_cross_memory_ratio"] = safe_ratio(pid1.dec_cross.memory, pie1.dec_cross.memory);
  if (preset) {
    summary["preset"] = preset->name;
    summary["reported_ratio_low"] = preset->reported_ratio_low;
    summary["reported_ratio_high"] = preset->reported_ratio_high;
    summary["within_accept_band"] = ratio >= preset->accept_low && ratio <= preset->accept_high;
  }

  DocumentHeader h;
  h.kind = "cost";
  h.run_id = default_run_id(o, preset ? preset->name : shape_run_id(s));
  h.seed = o.seed;
  h.config = {{"shape", to_json(s)}, {"flop_model", to_json(model)}, {"engine", o.engine}};
  if (preset) h.config["preset"] = preset->name;
  h.hw_profile = profiles.back().name;
  if (preset) h.notes.push_back(preset->note);
  h.notes.push_back("memory in symbols, operations in multiply-accumulates; decoder rows total over n_t");

  say(o, "shape " + shape_run_id(s) + (preset ? " (preset " + preset->name + ")" : std::string()));
  say(o, "flop_ratio PiD/PiE " + fmt(ratio));
  for (CostMode mode : {CostMode::table1, CostMode::appendix_b}) {
    say(o, std::string("[") + to_string(mode) + "]");
    char line[200];
    std::snprintf(line, sizeof line, "  %-4s %-16s %16s %16s %12s", "cfg", "component", "memory", "operations",
                  "R");
    say(o, line);
    for (EngineKind k : engines.list()) {
      const CostBreakdown b = table1_counts(s, k, mode);
      const std::pair<const char*, CostCell> cells[] = {{"enc_self", b.enc_self},
                                                        {"dec_self", b.dec_self},
                                                        {"dec_self_prompt", b.dec_self_prompt},
                                                        {"dec_cross", b.dec_cross},
                                                        {"dec_cross_prompt", b.dec_cross_prompt}};
      for (const auto& [name, c] : cells) {
        if (mode == CostMode::table1 && (std::string(name).find("prompt") != std::string::npos)) continue;
        std::snprintf(line, sizeof line, "  %-4s %-16s %16llu %16llu %12s", to_string(k), name,
                      static_cast<unsigned long long>(c.memory), static_cast<unsigned long long>(c.operations),
                      c.operations ? fmt(c.inverse_intensity(), 6).c_str() : "-");
        say(o, line);
      }
    }
  }
  for (EngineKind k : engines.list()) {
    for (const auto& [part, v] : formulas[to_string(k)].items()) {
      say(o, std::string("R ") + to_string(k) + " " + part + " " +
                 (v.is_null() ? std::string("-") : fmt(v["formula"].get<double>(), 6)));
    }
  }
  for (const auto& hw : profiles) {
    for (EngineKind k : engines.list()) {
      const RooflineEstimate r = roofline_estimate(table1_counts(s, k), hw);
      say(o, "roofline " + hw.name + " " + to_string(k) + " " + fmt(r.total_seconds(), 6) + " s");
    }
  }
  emit(o, make_document(h, summary, body));
  return kExitOk;
}

// ---------------------------------------------------------------- bench

struct BenchOptions {
  CommonOptions common;
  std::size_t reps = 3;
  std::size_t warmup = 1;
  std::string batch_sizes = "1,2,4";
  bool parallel = false;
  double max_memory_mb = 1024.0;
  std::string hw_profile;
};

std::vector<std::size_t> parse_size_list(const std::string& s, const std::string& what) {
  std::vector<std::size_t> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty() || !std::all_of(item.begin(), item.end(), [](unsigned char c) { return std::isdigit(c); }) ||
        item.size() > 9) {
      throw UsageError(what + ": expected a comma separated list of integers, got '" + s + "'");
    }
    out.push_back(std::stoul(item));
  }
  if (out.empty() || s.back() == ',') throw UsageError(what + ": expected a comma separated list of integers");
  return out;
}

Json timing_json(const TimingStats& t) {
  return {{"samples_s", t.samples},
          {"mean_s", t.mean},
          {"stddev_s", t.stddev},
          {"median_s", t.median},
          {"unstable", t.unstable()}};
}

Json engine_bench_json(const EngineBench& e) {
  Json batched = Json::array();
  for (const auto& b : e.batched) {
    batched.push_back({{"batch", b.batch}, {"run", timing_json(b.run)}, {"per_instance_s", b.per_instance_s}});
  }
  Json outs = Json::array();
  for (const auto& seq : e.outputs) outs.push_back(seq);
  return {{"single", timing_json(e.single)},
          {"batched", batched},
          {"best_batch", e.best_batch},
          {"best_per_instance_s", e.best_per_instance_s},
          {"counters", to_json(e.counters)},
          {"outputs", outs},
          {"repeat_mismatches", e.repeat_mismatches},
          {"unstable", e.unstable}};
}

int cmd_bench(const BenchOptions& bo) {
  const CommonOptions& o = bo.common;
  if (bo.parallel) throw UsageError("bench is a timing command and refuses --parallel");
  const Engines engines = parse_engines(o.engine);
  BenchConfig c;
  c.seed = o.seed;
  c.reps = bo.reps;
  c.warmup = bo.warmup;
  c.batch_sizes = parse_size_list(bo.batch_sizes, "--batch-sizes");
  if (bo.max_memory_mb <= 0) throw UsageError("--max-memory-mb must be positive");
  c.max_memory_bytes = bo.max_memory_mb * 1024.0 * 1024.0;
  std::optional<Preset> preset;
  ShapeParams base{c.U, 1, c.n_s, c.n_t, c.n_p, c.model.d_model, c.model.n_heads};
  if (!o.preset.empty()) {
    preset = find_preset(o.preset);
    base.U = preset->shape.U;
    base.n_s = preset->shape.n_s;
    base.n_t = preset->shape.n_t;
    base.n_p = preset->shape.n_p;
  }
  const ShapeParams s = apply_shape(base, o.shape);
  if (s.b != 1) throw UsageError("bench: use --batch-sizes instead of shape key b");
  c.U = s.U;
  c.n_s = s.n_s;
  c.n_t = s.n_t;
  c.n_p = s.n_p;
  c.model.d_model = s.d;
  c.model.n_heads = s.h;
  c.model = apply_model(c.model, o.model);
  c.validate();
  std::optional<HardwareProfile> hw;
  if (!bo.hw_profile.empty()) hw = load_hardware_profile(bo.hw_profile);

  const LatencyReport rep = run_bench(c);
  // Same engine, same seed: every timed run must reproduce the first run's tokens.
  const bool identical = rep.pie.repeat_mismatches == 0 && rep.pid.repeat_mismatches == 0;
  const ShapeParams bench_shape{c.U, 1, c.n_s, c.n_t, c.n_p, rep.config.model.d_model, rep.config.model.n_heads};

  Json body;
  for (EngineKind k : engines.list()) {
    body[to_string(k)] = engine_bench_json(k == EngineKind::pie ? rep.pie : rep.pid);
  }
  body["single_speedup"] = rep.single_speedup;
  body["batched_speedup"] = rep.batched_speedup;
  body["measured_flop_ratio"] = rep.measured_flop_ratio;
  body["predicted_flop_ratio"] = rep.predicted_flop_ratio;
  body["tokens_identical"] = identical;
  Json cost = Json::object();
  for (EngineKind k : engines.list()) cost[to_string(k)] = breakdown_json(table1_counts(bench_shape, k));
  body["cost_table1"] = cost;
  if (hw) {
    Json r = Json::object();
    for (EngineKind k : engines.list()) r[to_string(k)] = roofline_json(roofline_estimate(table1_counts(bench_shape, k), *hw));
    body["roofline"] = r;
  }

  Json summary;
  summary["shape"] = shape_run_id(bench_shape);
  summary["single_speedup"] = rep.single_speedup;
  summary["batched_speedup"] = rep.batched_speedup;
  summary["measured_flop_ratio"] = rep.measured_flop_ratio;
  summary["predicted_flop_ratio"] = rep.predicted_flop_ratio;
  summary["tokens_identical"] = identical;
  summary["unstable"] = rep.unstable();

  DocumentHeader h;
  h.kind = "bench";
  h.run_id = default_run_id(o, preset ? preset->name : shape_run_id(bench_shape));
  h.seed = o.seed;
  Json bs = c.batch_sizes;
  h.config = {{"engine", o.engine},      {"model", to_json(rep.config.model)}, {"shape", to_json(bench_shape)},
              {"reps", c.reps},          {"warmup", c.warmup},                 {"batch_sizes", bs},
              {"max_memory_bytes", c.max_memory_bytes}};
  if (preset) h.config["preset"] = preset->name;
  h.hw_profile = hw ? hw->name : "host";
  h.notes.push_back(kSyntheticNote);
  h.notes.push_back("engines run paired and interleaved on identical workloads; speedups are PiE/PiD medians");
  if (preset) h.notes.push_back("preset supplies U, n_s, n_t, n_p; the model is the toy benchmark model");

  say(o, "bench " + shape_run_id(bench_shape) + " reps " + std::to_string(c.reps) + " warmup " +
             std::to_string(c.warmup));
  for (EngineKind k : engines.list()) {
    const EngineBench& e = k == EngineKind::pie ? rep.pie : rep.pid;
    say(o, std::string("  ") + to_string(k) + " single median " + fmt(e.single.median * 1e3, 4) + " ms (mean " +
               fmt(e.single.mean * 1e3, 4) + " sd " + fmt(e.single.stddev * 1e3, 3) + ")");
    for (const auto& b : e.batched) {
      say(o, std::string("  ") + to_string(k) + " batch " + std::to_string(b.batch) + " per-instance " +
                 fmt(b.per_instance_s * 1e3, 4) + " ms");
    }
  }
  say(o, "  speedup single " + fmt(rep.single_speedup, 3) + " batched " + fmt(rep.batched_speedup, 3));
  say(o, "  flop ratio measured " + fmt(rep.measured_flop_ratio) + " predicted " + fmt(rep.predicted_flop_ratio));
  say(o, std::string("  tokens identical across repetitions ") + (identical ? "yes" : "no") + (rep.unstable() ? ", UNSTABLE timing" : ""));
  emit(o, make_document(h, summary, body));
  return kExitOk;
}

// ---------------------------------------------------------------- verify

struct VerifyCliOptions {
  CommonOptions common;
  std::string inject_fault;
  bool parallel = false;
};

Json check_json(const CheckResult& r) {
  Json m = Json::object();
  for (const auto& [k, v] : r.metrics) m[k] = v;
  return {{"id", r.id}, {"name", r.name}, {"passed", r.passed}, {"detail", r.detail}, {"metrics", m}};
}

int cmd_verify(const VerifyCliOptions& vo) {
  const CommonOptions& o = vo.common;
  VerifyOptions v;
  v.seed = o.seed;
  if (!vo.inject_fault.empty()) {
    if (vo.inject_fault != "corrupt-shared-kv") {
      throw UsageError("--inject-fault supports only corrupt-shared-kv");
    }
    v.corrupt_shared_kv = true;
  }
  const auto results = run_verify_suite(v, vo.parallel);
  std::size_t failed = 0;
  Json checks = Json::array();
  for (const auto& r : results) {
    failed += !r.passed;
    checks.push_back(check_json(r));
    say(o, std::string(r.passed ? "PASS " : "FAIL ") + r.id + ": " + r.detail);
  }
  say(o, std::to_string(results.size() - failed) + "/" + std::to_string(results.size()) + " checks passed");
  Json body{{"checks", checks}};
  Json summary{{"passed", failed == 0}, {"failed", failed}, {"total", results.size()}};
  DocumentHeader h;
  h.kind = "verify";
  h.run_id = default_run_id(o, "verify");
  h.seed = o.seed;
  h.config = {{"inject_fault", vo.inject_fault.empty() ? Json() : Json(vo.inject_fault)},
              {"training_instances", v.training_instances},
              {"parallel", vo.parallel}};
  emit(o, make_document(h, summary, body));
  return failed ? kExitCheckFailed : kExitOk;
}

// ---------------------------------------------------------------- train-toy

struct TrainCliOptions {
  CommonOptions common;
  std::size_t epochs = 20;
  std::size_t instances = 0;
  double target = 0.95;
  bool parallel = false;
};

Json train_report_json(const TrainReport& r) {
  Json epochs = Json::array();
  for (const auto& e : r.epochs) {
    epochs.push_back({{"epoch", e.epoch},
                      {"mean_loss", e.mean_loss},
                      {"heldout_exact_match", e.heldout_exact_match},
                      {"flops", e.counters.total().flops},
                      {"counters", to_json(e.counters)}});
  }
  return {{"initial_exact_match", r.initial_exact_match},
          {"final_exact_match", r.final_exact_match},
          {"epochs", epochs}};
}

int cmd_train_toy(const TrainCliOptions& to) {
  const CommonOptions& o = to.common;
  const Engines engines = parse_engines(o.engine);
  ToyTrainingSetup setup;
  setup.config = apply_model(setup.config, o.model);
  if (to.instances) setup.instances = to.instances;
  const SyntheticTask task =
      make_synthetic_task(o.seed, setup.num_prompts, setup.input_len(), setup.config.vocab_size, setup.instances);
  TrainOptions opts;
  opts.epochs = to.epochs;
  opts.seed = o.seed;
  opts.stop_at_exact_match = to.target;

  auto run = [&](EngineKind k) {
    Model m = make_training_model(setup, o.seed);
    return train(m, task, k, opts);
  };
  std::vector<EngineKind> kinds = engines.list();
  std::vector<TrainReport> reports;
  if (to.parallel) {
    std::vector<std::future<TrainReport>> pending;
    for (EngineKind k : kinds) pending.push_back(std::async(std::launch::async, run, k));
    for (auto& p : pending) reports.push_back(p.get());
  } else {
    for (EngineKind k : kinds) reports.push_back(run(k));
  }

  const InferenceShape s{1, setup.num_prompts, setup.input_len(), setup.value_len + 1, 1};
  const double predicted = predict_training_step_flops(setup.config, s, EngineKind::pie) /
                           predict_training_step_flops(setup.config, s, EngineKind::pid);
  Json body = Json::object();
  Json summary;
  std::optional<double> pie_flops, pid_flops;
  for (std::size_t i = 0; i < kinds.size(); ++i) {
    const TrainReport& r = reports[i];
    body[to_string(kinds[i])] = train_report_json(r);
    summary[std::string(to_string(kinds[i])) + "_exact_match"] = r.final_exact_match;
    summary[std::string(to_string(kinds[i])) + "_epochs"] = r.epochs.size();
    if (!r.epochs.empty()) {
      const double f = static_cast<double>(r.epochs.front().counters.total().flops);
      (kinds[i] == EngineKind::pie ? pie_flops : pid_flops) = f;
    }
    say(o, std::string(to_string(kinds[i])) + " initial exact match " + fmt(r.initial_exact_match, 3));
    for (const auto& e : r.epochs) {
      say(o, std::string("  ") + to_string(kinds[i]) + " epoch " + std::to_string(e.epoch) + " loss " +
                 fmt(e.mean_loss, 4) + " exact match " + fmt(e.heldout_exact_match, 3) + " flops " +
                 std::to_string(e.counters.total().flops));
    }
  }
  summary["predicted_flop_ratio"] = predicted;
  body["predicted_flop_ratio"] = predicted;
  if (pie_flops && pid_flops) {
    summary["measured_flop_ratio"] = *pie_flops / *pid_flops;
    body["measured_flop_ratio"] = *pie_flops / *pid_flops;
    say(o, "epoch flops PiE/PiD measured " + fmt(*pie_flops / *pid_flops) + " predicted " + fmt(predicted));
  }

  DocumentHeader h;
  h.kind = "train-toy";
  h.run_id = default_run_id(o, "train-toy");
  h.seed = o.seed;
  h.config = {{"engine", o.engine},
              {"model", to_json(setup.config)},
              {"num_prompts", setup.num_prompts},
              {"value_len", setup.value_len},
              {"instances", setup.instances},
              {"train_examples", task.train.size()},
              {"heldout_examples", task.heldout.size()},
              {"epochs", opts.epochs},
              {"batch_size", opts.batch_size},
              {"learning_rate", opts.learning_rate},
              {"stop_at_exact_match", opts.stop_at_exact_match},
              {"matrix_gain", setup.matrix_gain},
              {"embedding_gain", setup.embedding_gain},
              {"parallel", to.parallel}};
  h.notes.push_back(kSyntheticNote);
  h.notes.push_back("task: recover the value paired with each prompt key; exact match counts whole streams");
  emit(o, make_document(h, summary, body));
  return kExitOk;
}

// ---------------------------------------------------------------- report

struct ReportOptions {
  std::vector<std::string> inputs;
  std::string out;
  bool json = false;
};

int cmd_report(const ReportOptions& ro) {
  if (ro.inputs.empty()) throw UsageError("report needs at least one input document");
  std::vector<std::pair<std::string, Json>> docs;
  for (const auto& p : ro.inputs) docs.emplace_back(p, read_json_file(p));
  const MergedReport m = merge_documents(docs);
  DocumentHeader h;
  h.kind = "report";
  h.run_id = "report";
  h.config = {{"inputs", ro.inputs}};
  const Json doc = make_document(h, {{"rows", m.rows.size()}, {"sources", m.sources.size()}}, to_json(m));
  const std::string csv = to_csv(m);
  std::string stem = ro.out;
  if (stem.empty()) {
    if (const char* dir = std::getenv(kOutputDirEnv); dir && *dir) stem = std::string(dir) + "/report";
  }
  if (!stem.empty()) {
    write_text_file(stem + ".csv", csv);
    write_text_file(stem + ".json", doc.dump(2) + "\n");
  }
  std::cout << (ro.json ? doc.dump(2) + "\n" : csv);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"encdec: prompt-in-encoder and prompt-in-decoder cost, benchmark and verification tool"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kArtifactVersion);

  CostOptions cost;
  auto* c = app.add_subcommand("cost", "analytic cost tables, inverse intensities and roofline estimates");
  add_common(c, cost.common, true);
  c->add_option("--model", cost.common.model, "flop-model overrides, k=v list over ModelConfig fields");
  c->add_option("--hw-profile", cost.hw_profile, "extra hardware profile file (key=value)");

  BenchOptions bench;
  auto* b = app.add_subcommand("bench", "paired PiE/PiD latency benchmark on synthetic instances");
  add_common(b, bench.common, true);
  b->add_option("--model", bench.common.model, "model overrides, k=v list over ModelConfig fields");
  b->add_option("--reps", bench.reps, "timed repetitions (>= 3)")->capture_default_str();
  b->add_option("--warmup", bench.warmup, "untimed warmup runs")->capture_default_str();
  b->add_option("--batch-sizes", bench.batch_sizes, "batch sizes to sweep")->capture_default_str();
  b->add_option("--max-memory-mb", bench.max_memory_mb, "memory guard")->capture_default_str();
  b->add_option("--hw-profile", bench.hw_profile, "hardware profile for the roofline cross-reference");
  b->add_flag("--parallel", bench.parallel, "refused: timing runs are sequential");

  VerifyCliOptions verify;
  auto* v = app.add_subcommand("verify", "deterministic verification suite");
  add_common(v, verify.common, false);
  v->add_option("--inject-fault", verify.inject_fault, "debug fault: corrupt-shared-kv");
  v->add_flag("--parallel", verify.parallel, "run checks concurrently");

  TrainCliOptions train_opts;
  auto* t = app.add_subcommand("train-toy", "train both layouts on the synthetic task");
  add_common(t, train_opts.common, false);
  t->add_option("--model", train_opts.common.model, "model overrides, k=v list over ModelConfig fields");
  t->add_option("--epochs", train_opts.epochs, "maximum epochs")->capture_default_str();
  t->add_option("--instances", train_opts.instances, "synthetic instances (default 2000)");
  t->add_option("--target-exact-match", train_opts.target, "stop once held-out exact match reaches this")
      ->capture_default_str();
  t->add_flag("--parallel", train_opts.parallel, "train the layouts concurrently");

  ReportOptions report;
  auto* r = app.add_subcommand("report", "join report documents by run id into CSV and JSON");
  r->add_option("inputs", report.inputs, "report documents")->required();
  r->add_option("--out", report.out, "output stem; writes <stem>.csv and <stem>.json");
  r->add_flag("--json", report.json, "print JSON instead of CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*c) return cmd_cost(cost);
    if (*b) return cmd_bench(bench);
    if (*v) return cmd_verify(verify);
    if (*t) return cmd_train_toy(train_opts);
    if (*r) return cmd_report(report);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ConfigError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ResourceError& e) {
    std::cerr << "resource guard: " << e.what() << "\n";
    return kExitResource;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitCheckFailed;
  }
  return kExitUsage;
}
