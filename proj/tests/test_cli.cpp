//------------------------------------------------------------------------------
//
//   Copyright 2026 The sdcredit Authors
//
//   Licensed under the Apache License, Version 2.0 (the "License");
//   you may not use this file except in compliance with the License.
//   You may obtain a copy of the License at
//
//       http://www.apache.org/licenses/LICENSE-2.0
//
//   Unless required by applicable law or agreed to in writing, software
//   distributed under the License is distributed on an "AS IS" BASIS,
//   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
//   See the License for the specific language governing permissions and
//   limitations under the License.
//
//------------------------------------------------------------------------------

#include <json.hpp>

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace {

namespace fs = std::filesystem;
using Json   = nlohmann::json;

struct RunResult
{
  int         code = -1;
  std::string output;  ///< stdout and stderr interleaved
};

RunResult run_cli(std::string const &args)
{
  std::string const cmd = std::string("\"") + SDCREDIT_CLI_PATH + "\" " + args + " 2>&1";
  RunResult         res;
  FILE             *pipe = popen(cmd.c_str(), "r");
  if (!pipe)
  {
    return res;
  }
  std::array<char, 4096> buf{};
  while (std::fgets(buf.data(), static_cast<int>(buf.size()), pipe))
  {
    res.output += buf.data();
  }
  int const status = pclose(pipe);
  res.code         = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return res;
}

std::string config(char const *name)
{
  return std::string(SDCREDIT_CONFIG_DIR) + "/" + name;
}

std::string slurp(fs::path const &file)
{
  std::ifstream      in(file, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Json read_json(fs::path const &file)
{
  return Json::parse(slurp(file));
}

/// Fresh scratch directory per test, removed on exit.
class CliTest : public ::testing::Test
{
protected:
  void SetUp() override
  {
    auto const *info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("sdcredit_cli_") + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override
  {
    fs::remove_all(dir_);
  }

  fs::path write_config(std::string const &name, Json const &doc) const
  {
    fs::path const file = dir_ / name;
    std::ofstream(file) << doc.dump(2);
    return file;
  }

  fs::path dir_;
};

TEST_F(CliTest, ImpatienceSolveWritesThreeFiles)
{
  auto const res = run_cli("solve-sec3 --config " + config("sec3_example.json") + " --out " + dir_.string());
  ASSERT_EQ(res.code, 0) << res.output;
  EXPECT_TRUE(fs::exists(dir_ / "path.csv"));
  EXPECT_TRUE(fs::exists(dir_ / "welfare.json"));
  EXPECT_TRUE(fs::exists(dir_ / "mechanism.json"));
  auto const welfare = read_json(dir_ / "welfare.json");
  EXPECT_GE(welfare["W_A"].get<double>(), welfare["W_E"].get<double>());
  EXPECT_EQ(welfare["tStar"], 2);
}

TEST_F(CliTest, FullyNaiveConfigIsAcceptedWithNote)
{
  auto const res = run_cli("solve-sec3 --config " + config("sec3_fully_naive.json") + " --out " + dir_.string());
  ASSERT_EQ(res.code, 0) << res.output;
  auto const notes = read_json(dir_ / "welfare.json")["notes"];
  ASSERT_FALSE(notes.empty());
  EXPECT_NE(notes.dump().find("fully naive"), std::string::npos);
}

TEST_F(CliTest, UncertainFirmIsRejectedForImpatienceRuns)
{
  auto doc              = read_json(config("sec3_example.json"));
  doc["model"]["p"]     = {0.5, 0.5};
  doc["model"]["q"]     = {0.5, 0.5};
  auto const file       = write_config("bad.json", doc);
  auto const res        = run_cli("solve-sec3 --config " + file.string() + " --out " + dir_.string());
  EXPECT_EQ(res.code, 2);
  EXPECT_NE(res.output.find("p1=1 required"), std::string::npos) << res.output;
}

TEST_F(CliTest, UnknownKeyIsAValidationError)
{
  auto doc                 = read_json(config("penalty_n2.json"));
  doc["model"]["typo"]     = 1;
  auto const res           = run_cli("solve-sec4 --config " + write_config("typo.json", doc).string() +
                                     " --out " + dir_.string());
  EXPECT_EQ(res.code, 2);
  EXPECT_NE(res.output.find("model.typo"), std::string::npos) << res.output;
}

TEST_F(CliTest, MissingArgumentsAreValidationErrors)
{
  EXPECT_EQ(run_cli("solve-sec4").code, 2);
  EXPECT_EQ(run_cli("no-such-command").code, 2);
}

TEST_F(CliTest, PenaltySummary)
{
  auto const res = run_cli("solve-sec4 --config " + config("penalty_n2.json") + " --out " + dir_.string());
  ASSERT_EQ(res.code, 0) << res.output;
  auto const summary = read_json(dir_ / "sec4_summary.json");
  auto const entry   = summary["byDelta1"].at(0);
  EXPECT_NEAR(entry["contCostLowestType"].get<double>(), 3.10, 0.01);
  EXPECT_NEAR(entry["contCostHighestType"].get<double>(), 3.57, 0.01);
  EXPECT_NEAR(entry["percentFall"].get<double>(), 13.0, 1.0);
  EXPECT_TRUE(fs::exists(dir_ / "sec4_delta1_2.csv"));
  EXPECT_TRUE(fs::exists(dir_ / "euler.json"));
}

TEST_F(CliTest, LogRunReportsGrowthRatios)
{
  auto const res = run_cli("solve-sec4 --config " + config("log_optimistic.json") + " --out " + dir_.string());
  ASSERT_EQ(res.code, 0) << res.output;
  auto const euler = read_json(dir_ / "euler.json");
  ASSERT_FALSE(euler["equilibrium"].empty());
  EXPECT_TRUE(euler["equilibrium"][0].contains("growthRatios"));
}

TEST_F(CliTest, NonSeparatingExitsWithDump)
{
  auto const res = run_cli("solve-sec4 --config " + config("nonseparating.json") + " --out " + dir_.string());
  EXPECT_EQ(res.code, 4) << res.output;
  auto const dump = read_json(dir_ / "nonseparating_delta1_3.json");
  EXPECT_FALSE(dump["separating"].get<bool>());
}

TEST_F(CliTest, FigureCsvIsMonotone)
{
  auto const res = run_cli("solve-sec4 --config " + config("figure.json") + " --out " + dir_.string());
  ASSERT_EQ(res.code, 0) << res.output;
  std::istringstream csv(slurp(dir_ / "sec4_delta1_10.csv"));
  std::string        line;
  std::getline(csv, line);
  ASSERT_EQ(line.rfind("n,delta2,", 0), 0u);
  double prev = -1.0;
  int    rows = 0;
  while (std::getline(csv, line))
  {
    std::stringstream cells(line);
    std::string       cell;
    for (int k = 0; k <= 7; ++k)
    {
      std::getline(cells, cell, ',');
    }
    double const cost = std::stod(cell);
    EXPECT_GT(cost, prev);
    prev = cost;
    ++rows;
  }
  EXPECT_EQ(rows, 10);
  EXPECT_TRUE(fs::exists(dir_ / "backloading_sweep.csv"));
}

TEST_F(CliTest, OutputIsByteIdenticalAcrossRuns)
{
  fs::path const a = dir_ / "a";
  fs::path const b = dir_ / "b";
  ASSERT_EQ(run_cli("figures --out " + a.string()).code, 0);
  ASSERT_EQ(run_cli("figures --out " + b.string()).code, 0);
  for (char const *f : {"figure1.csv", "figure2.csv", "figure3.csv", "figures.json"})
  {
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
    EXPECT_FALSE(slurp(a / f).empty()) << f;
  }
  ASSERT_EQ(run_cli("solve-sec4 --config " + config("figure.json") + " --out " + a.string()).code, 0);
  ASSERT_EQ(run_cli("solve-sec4 --config " + config("figure.json") + " --out " + b.string()).code, 0);
  EXPECT_EQ(slurp(a / "sec4_delta1_10.csv"), slurp(b / "sec4_delta1_10.csv"));
  EXPECT_EQ(slurp(a / "sec4_summary.json"), slurp(b / "sec4_summary.json"));
}

TEST_F(CliTest, VerifyPassesOnSampleConfigs)
{
  for (char const *name : {"sec3_example.json", "penalty_n2.json", "four_dates.json", "log_optimistic.json"})
  {
    auto const res = run_cli("verify --config " + config(name));
    EXPECT_EQ(res.code, 0) << name << "\n" << res.output;
    auto const report = Json::parse(res.output);
    EXPECT_TRUE(report["pass"].get<bool>()) << name;
  }
}

TEST_F(CliTest, TamperedPolicyFailsVerification)
{
  ASSERT_EQ(run_cli("solve-sec3 --config " + config("sec3_example.json") + " --out " + dir_.string()).code, 0);
  auto mech = read_json(dir_ / "mechanism.json");
  auto good = run_cli("verify --config " + config("sec3_example.json") + " --policy " +
                      (dir_ / "mechanism.json").string());
  EXPECT_EQ(good.code, 0) << good.output;

  // Pay a lot at date 2 after a patient report: the impatient type now lies.
  for (auto &node : mech["policy"]["nodes"])
  {
    if (node["date"] == 2 && node["history"] == Json::array({1, 2}))
    {
      node["v"] = 5.0;
    }
  }
  auto const file = write_config("tampered.json", mech);
  auto const bad  = run_cli("verify --config " + config("sec3_example.json") + " --policy " + file.string());
  EXPECT_EQ(bad.code, 5) << bad.output;
  auto const report = Json::parse(bad.output);
  EXPECT_FALSE(report["pass"].get<bool>());
  EXPECT_NE(report.dump().find("by reporting type"), std::string::npos) << "witness missing: " << report.dump();
}

TEST_F(CliTest, ReversalTable)
{
  auto const res = run_cli("reversal");
  ASSERT_EQ(res.code, 0);
  EXPECT_NE(res.output.find("0.75"), std::string::npos) << res.output;
}

}  // namespace
