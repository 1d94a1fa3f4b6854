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

// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit if any
// criterion fails.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <string>
#include <sys/wait.h>
#include <unistd.h>
#include <vector>

#include "encdec/bench.hpp"
#include "encdec/checks.hpp"
#include "encdec/report.hpp"
#include "encdec/training.hpp"

#ifndef ENCDEC_CLI_PATH
#error "ENCDEC_CLI_PATH must name the encdec executable"
#endif

namespace {

using namespace encdec;

constexpr std::uint64_t kSeed = 0;

struct Outcome {
  bool passed = false;
  std::string detail;
};

Outcome from(const CheckResult& r) { return {r.passed, r.detail}; }

Outcome both(const std::vector<CheckResult>& rs) {
  Outcome o{true, ""};
  for (const auto& r : rs) {
    o.passed = o.passed && r.passed;
    o.detail += (o.detail.empty() ? "" : " | ") + std::string(r.passed ? "" : "[fail] ") + r.detail;
  }
  return o;
}

// Paired toy benchmark over U; batched speedup must not fall as U grows and
// must reach 1.5 from U = 16 on.
Outcome latency_sweep() {
  Outcome o{true, "batched speedup"};
  double previous = 0.0;
  for (std::size_t u : {4, 8, 16, 32}) {
    BenchConfig c;
    c.U = u;
    c.reps = 5;
    c.seed = kSeed;
    const LatencyReport r = run_bench(c);
    const double sp = r.batched_speedup;
    const bool faster = r.pid.best_per_instance_s < r.pie.best_per_instance_s;
    bool ok = sp >= previous;
    if (u >= 16) ok = ok && faster && sp >= 1.5;
    o.passed = o.passed && ok;
    o.detail += " U" + std::to_string(u) + " " + format_double(sp, 3) + (ok ? "" : "[fail]");
    previous = sp;
  }
  o.detail += " (non-decreasing, >= 1.5 at U >= 16)";
  return o;
}

Outcome training() {
  const ToyTrainingSetup setup;
  const SyntheticTask task = make_synthetic_task(kSeed, setup.num_prompts, setup.input_len(),
                                                 setup.config.vocab_size, setup.instances);
  TrainOptions opts;
  opts.seed = kSeed;
  opts.stop_at_exact_match = 0.95;
  Model pid_model = make_training_model(setup, kSeed);
  const TrainReport pid = train(pid_model, task, EngineKind::pid, opts);
  opts.epochs = 1;
  Model pie_model = make_training_model(setup, kSeed);
  const TrainReport pie = train(pie_model, task, EngineKind::pie, opts);

  const std::vector<double> epoch_flops = {static_cast<double>(pie.epochs[0].counters.total().flops),
                                           static_cast<double>(pid.epochs[0].counters.total().flops)};
  CheckResult em{"pid_exact_match", "", pid.final_exact_match >= 0.95, "", {}};
  em.detail = "PiD held-out exact match " + format_double(pid.final_exact_match, 3) + " after " +
              std::to_string(pid.epochs.size()) + " epochs (limit 0.95)";
  return both({em, check_training_flop_ratio(kSeed, setup.instances, &epoch_flops),
               check_gradient(kSeed)});
}

int run_command(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome determinism() {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / ("encdec-acceptance-" + std::to_string(::getpid()));
  fs::create_directories(dir);
  std::vector<Json> bodies;
  std::vector<int> codes;
  for (int i = 0; i < 2; ++i) {
    const fs::path out = dir / ("verify" + std::to_string(i) + ".json");
    codes.push_back(run_command(std::string("\"") + ENCDEC_CLI_PATH + "\" verify --json --seed " +
                                std::to_string(kSeed) + " --out \"" + out.string() + "\" > /dev/null"));
    bodies.push_back(read_json_file(out.string()));
  }
  fs::remove_all(dir);
  const bool same = bodies[0]["body"].dump() == bodies[1]["body"].dump() &&
                    bodies[0]["summary"].dump() == bodies[1]["summary"].dump();
  const bool ran = codes[0] == codes[1] && (codes[0] == 0 || codes[0] == 1);
  return {same && ran, std::string("two verify runs, bodies ") + (same ? "byte-identical" : "differ") +
                           ", exit codes " + std::to_string(codes[0]) + "/" + std::to_string(codes[1])};
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {1, "broadcast-sharing equivalence", [] { return from(check_broadcast_equivalence(kSeed)); }},
      {2, "encoder-sharing count law", [] { return from(check_encoder_count_law(kSeed)); }},
      {3, "inverse-intensity formulas", [] { return from(check_intensity_formulas()); }},
      {4, "preset flop ratios and paired latency",
       [] {
         const Outcome sweep = latency_sweep();
         const CheckResult ratios = check_preset_flop_ratios();
         return Outcome{ratios.passed && sweep.passed, ratios.detail + " | " + sweep.detail};
       }},
      {5, "incremental-decoding correctness", [] { return from(check_incremental_decoding(kSeed)); }},
      {6, "analytic-vs-measured deviation", [] { return from(check_cost_model_deviation(kSeed).result); }},
      {7, "toy training", training},
      {8, "verify determinism", determinism},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failed += !o.passed;
    std::printf("%s criterion %d (%s): %s [%.1f s]\n", o.passed ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(),
                dt);
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed ? 1 : 0;
}
