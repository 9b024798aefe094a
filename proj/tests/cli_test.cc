// Copyright 2026 The intrinsic-flow Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "cli/app.h"
#include "cli/config.h"
#include "cli/output.h"

namespace iflow::cli {
namespace {

namespace fs = std::filesystem;

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    root_ = fs::temp_directory_path() /
            (std::string("iflow_cli_") + info->name());
    fs::remove_all(root_);
    fs::create_directories(root_);
    setenv(kOutputRootEnv, root_.c_str(), 1);
  }
  void TearDown() override {
    unsetenv(kOutputRootEnv);
    fs::remove_all(root_);
  }

  fs::path WriteConfig(const std::string& name, const std::string& text) {
    const fs::path p = root_ / name;
    std::ofstream(p) << text;
    return p;
  }

  int Run(const fs::path& config) {
    out_.str("");
    err_.str("");
    return RunCommand(config.string(), out_, err_);
  }

  Json Manifest(const std::string& dir) {
    std::ifstream in(root_ / dir / "manifest.json");
    return Json::parse(in);
  }

  fs::path root_;
  std::ostringstream out_, err_;
};

constexpr char kTwoLayer[] = R"({
  "experiment": "compare-intrinsic",
  "seed": 3,
  "model": {"kind": "linear_chain", "dims": [3, 2, 4]},
  "init": {"kind": "relaxed_balanced", "lambda": [0.7]},
  "loss": {"kind": "quadratic", "target": "random"},
  "integrator": {"dt": 0.002, "t_final": 0.5, "record_every": 5},
  "output": {"dir": "two_layer"}
})";

TEST_F(CliTest, CompareIntrinsicTwoLayer) {
  ASSERT_EQ(Run(WriteConfig("c.json", kTwoLayer)), kExitOk) << err_.str();
  const Json m = Manifest("two_layer");
  EXPECT_EQ(m["status"], "ok");
  EXPECT_EQ(m["verdict"], "pass");
  EXPECT_EQ(m["summary"]["intrinsic"], "two_layer");
  EXPECT_LE(m["summary"]["compare_error"].get<double>(), 1e-4);
  EXPECT_NEAR(m["summary"]["lambda"][0].get<double>(), 0.7, 1e-10);
  EXPECT_EQ(m["seed"], 3);
  EXPECT_EQ(m["config_hash"].get<std::string>().size(), 16u);
  EXPECT_TRUE(m["versions"].contains("eigen"));
  for (const Json& f : m["files"]) {
    EXPECT_TRUE(fs::exists(root_ / "two_layer" / f.get<std::string>())) << f;
  }
}

TEST_F(CliTest, OutputsAreDeterministic) {
  const fs::path c = WriteConfig("c.json", kTwoLayer);
  ASSERT_EQ(Run(c), kExitOk);
  const std::string first =
      ReadFile(root_ / "two_layer" / "trajectory.csv") +
      ReadFile(root_ / "two_layer" / "manifest.json");
  fs::remove_all(root_ / "two_layer");
  ASSERT_EQ(Run(c), kExitOk);
  const std::string second =
      ReadFile(root_ / "two_layer" / "trajectory.csv") +
      ReadFile(root_ / "two_layer" / "manifest.json");
  EXPECT_EQ(first, second);
}

TEST_F(CliTest, MalformedJsonWritesNothing) {
  EXPECT_EQ(Run(WriteConfig("bad.json", "{\"experiment\": ")), kExitSchema);
  EXPECT_NE(err_.str().find("malformed JSON"), std::string::npos);
  EXPECT_EQ(std::distance(fs::directory_iterator(root_), fs::directory_iterator()),
            1);
}

TEST_F(CliTest, UnknownKeyRejectedBeforeOutput) {
  std::string text = kTwoLayer;
  text.replace(text.find("\"record_every\""), 0, "\"substeps\": 2, ");
  EXPECT_EQ(Run(WriteConfig("c.json", text)), kExitSchema);
  EXPECT_NE(err_.str().find("integrator.substeps: unknown key"),
            std::string::npos)
      << err_.str();
  EXPECT_FALSE(fs::exists(root_ / "two_layer"));
}

TEST_F(CliTest, SchemaViolations) {
  const char* cases[] = {
      R"({"experiment": "nope", "output": {"dir": "x"}})",
      R"({"experiment": "run-flow", "output": {"dir": "x"}})",
      R"({"experiment": "counterexample", "seed": -1, "output": {"dir": "x"}})",
      R"({"experiment": "counterexample", "output": {"dir": "x"},
          "tolerances": {"speed": 1}})",
      R"({"experiment": "compare-intrinsic", "output": {"dir": "x"},
          "model": {"kind": "attention", "d1": 2, "dim": 2},
          "loss": {"kind": "attention"}})",
      R"({"experiment": "run-flow", "output": {"dir": "x"},
          "model": {"kind": "linear_chain", "dims": [2, 2, 2]},
          "loss": {"target": [[1, 2], [3, 4], [5, 6]]}})",
      R"({"experiment": "check-criteria", "output": {"dir": "x"},
          "model": {"kind": "attention", "d1": 2, "dim": 2},
          "criteria": {"expect": ["frobenius"]}})",
      R"({"experiment": "counterexample", "output": {"dir": "x"},
          "sweep": [{"counterexample": {"bogus": 1}}]})",
  };
  for (const char* text : cases) {
    EXPECT_EQ(Run(WriteConfig("c.json", text)), kExitSchema) << text;
    EXPECT_FALSE(fs::exists(root_ / "x")) << text;
  }
}

TEST_F(CliTest, MissingConfigIsIoError) {
  EXPECT_EQ(Run(root_ / "absent.json"), kExitIo);
}

TEST_F(CliTest, UnwritableOutputIsIoError) {
  std::ofstream(root_ / "blocker") << "file";
  EXPECT_EQ(Run(WriteConfig("c.json", R"({"experiment": "counterexample",
      "counterexample": {"seeds": 1}, "output": {"dir": "blocker/sub"}})")),
            kExitIo);
}

TEST_F(CliTest, NumericalFailureKeepsPartialOutputs) {
  const char* text = R"({
    "experiment": "run-flow",
    "model": {"kind": "linear_chain", "dims": [2, 2, 2]},
    "init": {"kind": "random", "scale": 3.0},
    "loss": {"target": "random", "target_scale": 5.0},
    "integrator": {"dt": 1.0, "t_final": 50.0},
    "output": {"dir": "blowup"}
  })";
  EXPECT_EQ(Run(WriteConfig("c.json", text)), kExitNumerical);
  const Json m = Manifest("blowup");
  EXPECT_EQ(m["status"], "numerical_failure");
  EXPECT_EQ(m["error"]["kind"], "numerical");
  EXPECT_EQ(m["verdict"], "fail");
  EXPECT_TRUE(fs::exists(root_ / "blowup" / "trajectory.csv"));
}

TEST_F(CliTest, CheckCriteriaRankOne) {
  const char* text = R"({
    "experiment": "check-criteria",
    "seed": 5,
    "model": {"kind": "rank_one", "n": 2, "m": 2, "r": 2},
    "criteria": {"points": 5},
    "output": {"dir": "criteria", "prefix": "rank_one"}
  })";
  ASSERT_EQ(Run(WriteConfig("c.json", text)), kExitOk) << out_.str();
  const Json m = Manifest("criteria");
  EXPECT_EQ(m["summary"]["intersection_trivial"], true);
  EXPECT_EQ(m["summary"]["frobenius_holds"], true);
  EXPECT_TRUE(fs::exists(root_ / "criteria" / "rank_one_criteria.csv"));
}

TEST_F(CliTest, SweepAggregatesWorstCase) {
  const char* text = R"({
    "experiment": "counterexample",
    "counterexample": {"seeds": 2},
    "output": {"dir": "sweep"},
    "sweep": [{"seed": 1}, {"seed": 10, "counterexample": {"n": 4}}]
  })";
  ASSERT_EQ(Run(WriteConfig("c.json", text)), kExitOk) << out_.str();
  const Json m = Manifest("sweep");
  ASSERT_EQ(m["points"].size(), 2u);
  const double a = m["points"][0]["summary"]["min_dm_ratio"].get<double>();
  const double b = m["points"][1]["summary"]["min_dm_ratio"].get<double>();
  EXPECT_EQ(m["summary"]["min_dm_ratio"].get<double>(), std::min(a, b));
  EXPECT_TRUE(fs::exists(root_ / "sweep" / "point_1" / "counterexample.csv"));
  EXPECT_EQ(m["checks"][0]["name"], "point_0/max_flat_ratio");
}

TEST_F(CliTest, AbsoluteDirIgnoresRoot) {
  const fs::path abs = root_ / "elsewhere" / "abs";
  const std::string text =
      R"({"experiment": "counterexample", "counterexample": {"seeds": 1},
          "output": {"dir": ")" + abs.string() + R"("}})";
  ASSERT_EQ(Run(WriteConfig("c.json", text)), kExitOk);
  EXPECT_TRUE(fs::exists(abs / "manifest.json"));
}

TEST_F(CliTest, ReportEmptyHasHeaderOnly) {
  std::ostringstream out, err;
  EXPECT_EQ(ReportCommand({}, "csv", "", out, err), kExitOk);
  EXPECT_EQ(out.str(),
            "path,experiment,status,verdict,checks_passed,checks_total,"
            "config_hash,seed,compare_error,max_drift_relative,"
            "empirical_order,metrics\n");
}

TEST_F(CliTest, ReportRowsSortedByPath) {
  ASSERT_EQ(Run(WriteConfig("a.json", R"({"experiment": "counterexample",
      "counterexample": {"seeds": 1}, "output": {"dir": "b"}})")), kExitOk);
  ASSERT_EQ(Run(WriteConfig("b.json", R"({"experiment": "counterexample",
      "counterexample": {"seeds": 1}, "output": {"dir": "a"}})")), kExitOk);
  std::ostringstream out, err;
  const std::string pa = (root_ / "a" / "manifest.json").string();
  const std::string pb = (root_ / "b" / "manifest.json").string();
  ASSERT_EQ(ReportCommand({pb, pa}, "csv", "", out, err), kExitOk);
  std::istringstream lines(out.str());
  std::string header, first, second, extra;
  std::getline(lines, header);
  std::getline(lines, first);
  std::getline(lines, second);
  EXPECT_FALSE(std::getline(lines, extra));
  EXPECT_EQ(first.rfind(pa + ",counterexample,ok,pass,2,2,", 0), 0u) << first;
  EXPECT_EQ(second.rfind(pb + ",", 0), 0u);

  std::ostringstream md;
  ASSERT_EQ(ReportCommand({pa}, "markdown", "", md, err), kExitOk);
  EXPECT_EQ(md.str().rfind("| path | experiment |", 0), 0u);
}

TEST_F(CliTest, ReportMissingManifest) {
  std::ostringstream out, err;
  EXPECT_EQ(ReportCommand({(root_ / "none.json").string()}, "csv", "", out, err),
            kExitIo);
}

TEST_F(CliTest, ConvergenceReportHasOrder) {
  const char* text = R"({
    "experiment": "convergence",
    "seed": 2,
    "integrator": {"dt": 0.05, "t_final": 0.2},
    "convergence": {"sizes": [8, 16], "quadrature_nodes": 16,
                    "gamma_probes": [{"name": "zero",
                                      "lambda": {"kind": "constant", "c": 0},
                                      "expect_zero": true}]},
    "output": {"dir": "conv"}
  })";
  Run(WriteConfig("c.json", text));
  const Json m = Manifest("conv");
  EXPECT_EQ(m["status"], "ok");
  EXPECT_LE(m["summary"]["gamma_max_zero"].get<double>(), 1e-10);
  std::ostringstream out, err;
  ASSERT_EQ(ReportCommand({(root_ / "conv" / "manifest.json").string()}, "csv",
                          "", out, err),
            kExitOk);
  std::istringstream lines(out.str());
  std::string header, row;
  std::getline(lines, header);
  std::getline(lines, row);
  // empirical_order is the 11th column.
  std::istringstream cells(row);
  std::string cell;
  for (int i = 0; i < 11; ++i) std::getline(cells, cell, ',');
  EXPECT_NEAR(std::stod(cell), m["summary"]["empirical_order"].get<double>(),
              1e-9);
}

TEST_F(CliTest, ShippedConfigsValidate) {
  int count = 0;
  for (const auto& entry : fs::directory_iterator(IFLOW_CONFIG_DIR)) {
    if (entry.path().extension() != ".json") continue;
    ++count;
    EXPECT_NO_THROW(ParseConfigText(ReadFile(entry.path()))) << entry.path();
  }
  EXPECT_GE(count, 10);
}

TEST(ConfigHash, StableAndKeyOrderIndependent) {
  const Json a = Json::parse(R"({"b": 1, "a": [1, 2]})");
  const Json b = Json::parse(R"({"a": [1, 2], "b": 1})");
  EXPECT_EQ(ConfigHash(a), ConfigHash(b));
  EXPECT_NE(ConfigHash(a), ConfigHash(Json::parse(R"({"b": 2, "a": [1, 2]})")));
  // FNV-1a 64 of the empty object "{}".
  EXPECT_EQ(ConfigHash(Json::object()), "08f44b07b5901a25");
}

}  // namespace
}  // namespace iflow::cli
