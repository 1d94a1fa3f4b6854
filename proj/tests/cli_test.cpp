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

#include <cstdlib>
#include <filesystem>
#include <string>
#include <sys/wait.h>
#include <unistd.h>

#include <gtest/gtest.h>

#include "encdec/report.hpp"

namespace encdec {
namespace {

namespace fs = std::filesystem;

// ---- shape and model parsing ----

TEST(ShapeParsing, OverridesOnlyNamedKeys) {
  const ShapeParams s = apply_shape({2, 1, 10, 5, 3, 64, 4}, "U=8,n_p=0");
  EXPECT_EQ(s, (ShapeParams{8, 1, 10, 5, 0, 64, 4}));
  EXPECT_EQ(apply_shape({2, 1, 10, 5, 3, 64, 4}, ""), (ShapeParams{2, 1, 10, 5, 3, 64, 4}));
}

TEST(ShapeParsing, MalformedIsUsageError) {
  const ShapeParams base;
  for (const char* bad : {"U", "U=", "=3", "U=x", "U=-1", "U=1,", ",U=1", "q=1", "U=1,U=2", "U=0", "d=10,h=3"}) {
    EXPECT_THROW(apply_shape(base, bad), UsageError) << bad;
  }
}

TEST(ModelParsing, UnknownKeyAndInvalidConfig) {
  EXPECT_EQ(apply_model(ModelConfig{}, "d_model=32,n_heads=2").d_model, 32u);
  EXPECT_THROW(apply_model(ModelConfig{}, "width=3"), UsageError);
  EXPECT_THROW(apply_model(ModelConfig{}, "d_model=30,n_heads=4"), UsageError);
}

// ---- report join ----

Json doc(const std::string& kind, const std::string& run, Json summary) {
  DocumentHeader h;
  h.kind = kind;
  h.run_id = run;
  return make_document(h, std::move(summary), Json::object());
}

TEST(ReportMerge, JoinsKindsByRunId) {
  const MergedReport m = merge_documents({{"c", doc("cost", "multiwoz-s0", {{"flop_ratio", 0.1}})},
                                          {"b", doc("bench", "multiwoz-s0", {{"measured_flop_ratio", 0.2}})}});
  ASSERT_EQ(m.rows.size(), 1u);
  EXPECT_EQ(m.rows[0].at("cost_flop_ratio"), 0.1);
  EXPECT_EQ(m.rows[0].at("bench_measured_flop_ratio"), 0.2);
}

TEST(ReportMerge, DisjointRunIdsKeepRowsWithEmptyColumns) {
  const MergedReport m = merge_documents({{"c", doc("cost", "a", {{"flop_ratio", 0.5}})},
                                          {"v", doc("verify", "b", {{"passed", true}})}});
  ASSERT_EQ(m.rows.size(), 2u);
  const std::string csv = to_csv(m);
  const std::string header = csv.substr(0, csv.find('\n'));
  EXPECT_EQ(header.rfind("run_id,cost_shape,cost_flop_ratio,", 0), 0u);
  const std::size_t columns = m.columns.size();
  EXPECT_NE(csv.find("a,,0.5" + std::string(columns - 3, ',') + "\n"), std::string::npos);
  const Json j = to_json(m);
  EXPECT_TRUE(j["rows"][0]["verify_passed"].is_null());
  EXPECT_EQ(j["rows"][1]["verify_passed"], true);
  EXPECT_TRUE(j["rows"][1]["cost_flop_ratio"].is_null());
}

TEST(ReportMerge, DuplicateRunIdIsError) {
  EXPECT_THROW(merge_documents({{"x", doc("cost", "a", Json::object())}, {"y", doc("cost", "a", Json::object())}}),
               UsageError);
}

TEST(ReportMerge, RejectsForeignDocuments) {
  EXPECT_THROW(merge_documents({{"x", Json{{"a", 1}}}}), UsageError);
  EXPECT_THROW(merge_documents({{"x", doc("report", "a", Json::object())}}), UsageError);
}

TEST(ReportMerge, CsvQuotesSeparators) {
  EXPECT_EQ(csv_cell(Json("a,b")), "\"a,b\"");
  EXPECT_EQ(csv_cell(Json("say \"hi\"")), "\"say \"\"hi\"\"\"");
  EXPECT_EQ(csv_cell(Json(true)), "true");
}

TEST(Document, HeaderCarriesProvenance) {
  DocumentHeader h;
  h.kind = "cost";
  h.run_id = "r";
  h.seed = 7;
  h.config = {{"k", 1}};
  h.hw_profile = "p";
  const Json d = make_document(h, Json::object(), Json::object());
  for (const char* key : {"artifact", "version", "kind", "run_id", "seed", "config", "hw_profile", "timestamp"}) {
    EXPECT_TRUE(d["header"].contains(key)) << key;
  }
  EXPECT_EQ(d["header"]["seed"], 7);
}

// ---- the executable ----

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("encdec-cli-" + std::to_string(::getpid()) + "-" +
                                        ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  int run(const std::string& args) const {
    const std::string cmd = std::string("\"") + ENCDEC_CLI_PATH + "\" " + args + " > \"" +
                            (dir_ / "stdout").string() + "\" 2> \"" + (dir_ / "stderr").string() + "\"";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

TEST_F(Cli, MalformedShapeExitsTwo) { EXPECT_EQ(run("cost --shape U=abc"), 2); }

TEST_F(Cli, UnknownPresetExitsTwo) { EXPECT_EQ(run("cost --preset nowhere"), 2); }

TEST_F(Cli, TooFewRepsExitsTwo) { EXPECT_EQ(run("bench --reps 1"), 2); }

TEST_F(Cli, BenchRefusesParallel) { EXPECT_EQ(run("bench --parallel"), 2); }

TEST_F(Cli, MemoryGuardExitsThree) { EXPECT_EQ(run("bench --max-memory-mb 1"), 3); }

TEST_F(Cli, UnknownSubcommandExitsTwo) { EXPECT_EQ(run("frobnicate"), 2); }

TEST_F(Cli, CostPresetCarriesRatio) {
  ASSERT_EQ(run("cost --preset multiwoz --out " + path("c.json")), 0);
  const Json d = read_json_file(path("c.json"));
  EXPECT_EQ(d["header"]["run_id"], "multiwoz-s0");
  const double r = d["summary"]["flop_ratio"];
  EXPECT_GE(r, 0.05);
  EXPECT_LE(r, 0.2);
  EXPECT_TRUE(d["body"]["tables"].contains("table1"));
  EXPECT_TRUE(d["body"]["tables"].contains("appendixB"));
}

TEST_F(Cli, SinglePromptRowsIdentical) {
  ASSERT_EQ(run("cost --shape U=1,n_p=0 --out " + path("c.json")), 0);
  const Json d = read_json_file(path("c.json"));
  for (const char* mode : {"table1", "appendixB"}) {
    EXPECT_EQ(d["body"]["tables"][mode]["pie"], d["body"]["tables"][mode]["pid"]) << mode;
  }
}

TEST_F(Cli, OutputDirectoryFromEnvironment) {
  ASSERT_EQ(run("cost --preset radqa"), 0);  // no file without --out or the variable
  ASSERT_EQ(::setenv("ENCDEC_OUTPUT_DIR", dir_.c_str(), 1), 0);
  const int rc = run("cost --preset radqa");
  ::unsetenv("ENCDEC_OUTPUT_DIR");
  ASSERT_EQ(rc, 0);
  EXPECT_TRUE(fs::exists(dir_ / "cost-radqa-s0.json"));
}

TEST_F(Cli, ReportDuplicateRunIdExitsTwo) {
  ASSERT_EQ(run("cost --preset multiwoz --out " + path("a.json")), 0);
  EXPECT_EQ(run("report " + path("a.json") + " " + path("a.json")), 2);
}

TEST_F(Cli, ReportWritesCsvAndJson) {
  ASSERT_EQ(run("cost --preset multiwoz --out " + path("a.json")), 0);
  ASSERT_EQ(run("cost --preset radqa --out " + path("b.json")), 0);
  ASSERT_EQ(run("report " + path("a.json") + " " + path("b.json") + " --out " + path("merged")), 0);
  EXPECT_TRUE(fs::exists(path("merged.csv")));
  const Json m = read_json_file(path("merged.json"));
  EXPECT_EQ(m["body"]["rows"].size(), 2u);
}

}  // namespace
}  // namespace encdec
