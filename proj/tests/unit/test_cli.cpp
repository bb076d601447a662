#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "commands.hpp"
#include "json.hpp"
#include "manifest.hpp"

namespace fs = std::filesystem;
using storagessm::app::sha256_file;

namespace {

const std::string kCoarse = " --grid 40 --quad-nodes 32 --policy-tol 1e-6 --root-tol 1e-8";

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / ("storagessm_cli_" + std::string(info->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override {
    if (!HasFailure()) fs::remove_all(dir_);
  }

  // Runs the CLI from dir_ with optional environment prefix; returns the exit code.
  int run(const std::string& args, const std::string& env = "") {
    const auto log = dir_ / "log.txt";
    const std::string cmd = "cd '" + dir_.string() + "' && " + env + " '" STORAGESSM_CLI_PATH "' " +
                            args + " > '" + log.string() + "' 2>&1";
    const int status = std::system(cmd.c_str());
    last_log_ = slurp(log);
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  // A short simulated storage series shared by the fitting tests.
  fs::path simulate(int length = 120) {
    const auto out = dir_ / "sim";
    EXPECT_EQ(run("simulate -q --seed 11 -T " + std::to_string(length) + " -o sim" + kCoarse), 0)
        << last_log_;
    return out / "prices.csv";
  }

  fs::path dir_;
  std::string last_log_;
};

TEST_F(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(run(""), 2);
  EXPECT_EQ(run("bogus"), 2);
  EXPECT_EQ(run("solve --grid notanumber"), 2);
  EXPECT_EQ(run("fit --model nosuchmodel --data x.csv"), 2);
  EXPECT_EQ(run("solve --help"), 0);
}

TEST_F(Cli, SolveIsByteIdenticalAcrossRuns) {
  ASSERT_EQ(run("solve -q -o a" + kCoarse), 0) << last_log_;
  ASSERT_EQ(run("solve -q -o b" + kCoarse), 0) << last_log_;
  for (const char* f : {"equilibrium.csv", "solution.json", "manifest.json"})
    EXPECT_EQ(slurp(dir_ / "a" / f), slurp(dir_ / "b" / f)) << f;
  EXPECT_FALSE(fs::exists(dir_ / "a" / "INCOMPLETE"));
}

TEST_F(Cli, ManifestRecordsHashesSeedAndConfig) {
  ASSERT_EQ(run("solve -q --seed 42 -o a" + kCoarse), 0) << last_log_;
  const auto m = nlohmann::json::parse(slurp(dir_ / "a" / "manifest.json"));
  EXPECT_EQ(m.at("command"), "solve");
  EXPECT_EQ(m.at("seed"), 42);
  EXPECT_EQ(m.at("config").at("solver").at("grid_size"), 40);
  EXPECT_EQ(m.at("outputs").at("equilibrium.csv"), sha256_file(dir_ / "a" / "equilibrium.csv"));
  EXPECT_TRUE(m.at("versions").contains("compiler"));
}

TEST_F(Cli, OutputDirectoryFromEnvironment) {
  ASSERT_EQ(run("solve -q" + kCoarse, "STORAGESSM_OUTPUT_DIR=envout"), 0) << last_log_;
  EXPECT_TRUE(fs::exists(dir_ / "envout" / "equilibrium.csv"));
  ASSERT_EQ(run("solve -q -o flag" + kCoarse, "STORAGESSM_OUTPUT_DIR=envout2"), 0);
  EXPECT_TRUE(fs::exists(dir_ / "flag" / "equilibrium.csv"));
  EXPECT_FALSE(fs::exists(dir_ / "envout2"));
  ASSERT_EQ(run("solve -q" + kCoarse, "unset STORAGESSM_OUTPUT_DIR;"), 0);
  EXPECT_TRUE(fs::exists(dir_ / "storagessm-solve" / "manifest.json"));
}

TEST_F(Cli, BadDataExitsThreeAndMarksIncomplete) {
  std::ofstream(dir_ / "bad.csv") << "date,price\n2000-01,1.5\n2000-02,0\n";
  EXPECT_EQ(run("fit -q --data bad.csv -o run"), 3);
  EXPECT_NE(last_log_.find("bad.csv:3"), std::string::npos) << last_log_;
  const auto marker = slurp(dir_ / "run" / "INCOMPLETE");
  EXPECT_NE(marker.find("stage: load data"), std::string::npos) << marker;
  EXPECT_FALSE(fs::exists(dir_ / "run" / "manifest.json"));
}

TEST_F(Cli, SolverFailureExitsFour) {
  EXPECT_EQ(run("solve -q -o run --max-iters 2" + kCoarse), 4) << last_log_;
  EXPECT_NE(slurp(dir_ / "run" / "INCOMPLETE").find("stage: solve"), std::string::npos);
}

TEST_F(Cli, InvalidParametersExitTwo) {
  EXPECT_EQ(run("solve -q -o run --delta 1.5" + kCoarse), 2) << last_log_;
  EXPECT_EQ(run("solve -q -o run --b -1" + kCoarse), 2) << last_log_;
}

TEST_F(Cli, DiagnoseNeedsExactlyOneParameterSource) {
  const auto prices = simulate(40);
  EXPECT_EQ(run("diagnose -q --model lgll --data " + prices.string() + " -o d"), 2);
  EXPECT_EQ(run("diagnose -q --model lgll --data " + prices.string() + " -o d --theta 0.1 0.4"), 0)
      << last_log_;
  EXPECT_TRUE(fs::exists(dir_ / "d" / "diagnostics.csv"));
  EXPECT_TRUE(fs::exists(dir_ / "d" / "residuals.csv"));
}

TEST_F(Cli, SuccessfulRunClearsStaleMarker) {
  EXPECT_EQ(run("solve -q -o run --max-iters 2" + kCoarse), 4);
  ASSERT_TRUE(fs::exists(dir_ / "run" / "INCOMPLETE"));
  EXPECT_EQ(run("solve -q -o run" + kCoarse), 0);
  EXPECT_FALSE(fs::exists(dir_ / "run" / "INCOMPLETE"));
  EXPECT_TRUE(fs::exists(dir_ / "run" / "manifest.json"));
}

TEST_F(Cli, ReplayMatchesWithDifferentThreadCount) {
  const auto prices = simulate();
  ASSERT_EQ(run("fit -q -j 1 --data " + prices.string() + " -N 200 -M 200 --burn-in 50 -o fit" +
                kCoarse),
            0)
      << last_log_;
  EXPECT_EQ(run("replay -q -j 4 fit -o again"), 0) << last_log_;
  EXPECT_NE(last_log_.find("match    chain.csv"), std::string::npos) << last_log_;
  EXPECT_EQ(last_log_.find("MISMATCH"), std::string::npos) << last_log_;
  EXPECT_EQ(slurp(dir_ / "fit" / "chain.csv"), slurp(dir_ / "again" / "chain.csv"));
}

TEST_F(Cli, ReplayDetectsTamperedOutput) {
  ASSERT_EQ(run("solve -q -o run" + kCoarse), 0);
  std::ofstream(dir_ / "run" / "equilibrium.csv", std::ios::app) << "0,0,0\n";
  EXPECT_EQ(run("replay -q run -o again"), 7) << last_log_;
  EXPECT_NE(last_log_.find("MISMATCH equilibrium.csv"), std::string::npos) << last_log_;
}

TEST_F(Cli, ReplayRejectsChangedInput) {
  const auto prices = simulate(40);
  ASSERT_EQ(run("diagnose -q --model lgll --theta 0.1 0.4 --data " + prices.string() + " -o d"), 0);
  std::ofstream(prices, std::ios::app) << "2099-01,1.0\n";
  EXPECT_EQ(run("replay -q d -o again"), 7) << last_log_;
  EXPECT_EQ(run("replay -q d -o d"), 2);
}

TEST_F(Cli, CompareFavoursStorageOnStorageData) {
  const auto prices = simulate(150);
  ASSERT_EQ(run("compare -q storage-ssm lgll --data " + prices.string() +
                " -N 300 -M 500 --burn-in 150 -L 200 -o cmp" + kCoarse),
            0)
      << last_log_;
  std::ifstream in(dir_ / "cmp" / "comparison.csv");
  std::string header, storage, lgll;
  std::getline(in, header);
  std::getline(in, storage);
  std::getline(in, lgll);
  ASSERT_EQ(storage.rfind("storage-ssm,", 0), 0u);
  ASSERT_EQ(lgll.rfind("lgll,", 0), 0u);
  const double ml_storage = std::stod(storage.substr(storage.find(',') + 1));
  const double ml_lgll = std::stod(lgll.substr(lgll.find(',') + 1));
  EXPECT_GT(ml_storage - ml_lgll, 0.0);
  const double bf_column = std::stod(lgll.substr(lgll.rfind(',') + 1));
  EXPECT_NEAR(bf_column, ml_storage - ml_lgll, 1e-9);
  EXPECT_TRUE(fs::exists(dir_ / "cmp" / "economics.csv"));
}

TEST_F(Cli, FitDetTrendWritesTrendPath) {
  const auto prices = simulate(60);
  ASSERT_EQ(run("fit -q --model rcs3 --data " + prices.string() + " -M 300 --burn-in 100 -o t" +
                kCoarse),
            0)
      << last_log_;
  const auto summary = nlohmann::json::parse(slurp(dir_ / "t" / "summary.json"));
  EXPECT_EQ(summary.at("model"), "rcs3");
  EXPECT_EQ(summary.at("observations"), 60);
  EXPECT_TRUE(fs::exists(dir_ / "t" / "filtered.csv"));
}

}  // namespace
