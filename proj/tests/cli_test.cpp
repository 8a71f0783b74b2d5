// Drives the `atb` executable end to end.

#include <gtest/gtest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>

namespace {

namespace fs = std::filesystem;

int RunCli(const std::string& args, const fs::path& stdout_file = "/dev/null") {
  const std::string cmd = std::string(ATB_CLI_PATH) + " " + args + " > " + stdout_file.string() + " 2>/dev/null";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string Slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("atb_cli_" + std::to_string(::getpid()));
    fs::create_directories(dir_);
    std::ofstream(dir_ / "cfg.json") << R"({"environment": "gridworld", "episodes": 30, "trials": 5, "seed": 9})";
  }
  void TearDown() override { fs::remove_all(dir_); }
  fs::path dir_;
};

TEST_F(CliTest, RunWritesCsvAndSvg) {
  const auto cfg = (dir_ / "cfg.json").string();
  ASSERT_EQ(RunCli("run --config " + cfg + " --out-csv " + (dir_ / "a.csv").string() + " --out-svg " +
                (dir_ / "a.svg").string()),
            0);
  const std::string csv = Slurp(dir_ / "a.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "strategy,episode,mean_rms,ci_halfwidth");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 6 * 30 + 1);
  EXPECT_NE(Slurp(dir_ / "a.svg").find("<svg"), std::string::npos);
}

TEST_F(CliTest, RunIsByteDeterministicAcrossThreadCounts) {
  const auto cfg = (dir_ / "cfg.json").string();
  ASSERT_EQ(RunCli("run --config " + cfg + " --threads 1 --out-csv " + (dir_ / "a.csv").string()), 0);
  ASSERT_EQ(RunCli("run --config " + cfg + " --threads 1 --out-csv " + (dir_ / "b.csv").string()), 0);
  ASSERT_EQ(RunCli("run --config " + cfg + " --threads 4 --out-csv " + (dir_ / "c.csv").string()), 0);
  EXPECT_EQ(Slurp(dir_ / "a.csv"), Slurp(dir_ / "b.csv"));
  EXPECT_EQ(Slurp(dir_ / "a.csv"), Slurp(dir_ / "c.csv"));
  ASSERT_EQ(RunCli("run --config " + cfg + " --seed 10 --out-csv " + (dir_ / "d.csv").string()), 0);
  EXPECT_NE(Slurp(dir_ / "a.csv"), Slurp(dir_ / "d.csv"));
}

TEST_F(CliTest, TrialsOverride) {
  const auto cfg = (dir_ / "cfg.json").string();
  EXPECT_NE(RunCli("run --config " + cfg + " --trials 1 --out-csv " + (dir_ / "x.csv").string()), 0);
  EXPECT_EQ(RunCli("run --config " + cfg + " --trials 1", dir_ / "out.txt"), 0);
  EXPECT_NE(Slurp(dir_ / "out.txt").find("policy-atb"), std::string::npos);
}

TEST_F(CliTest, BadConfigFails) {
  std::ofstream(dir_ / "bad.json") << R"({"gamma": 1.5})";
  EXPECT_NE(RunCli("run --config " + (dir_ / "bad.json").string()), 0);
  EXPECT_NE(RunCli("run --config " + (dir_ / "missing.json").string()), 0);
  EXPECT_NE(RunCli("frobnicate"), 0);
}

TEST_F(CliTest, VerifyReport) {
  ASSERT_EQ(RunCli("verify --sweeps 5 --seed 3 --no-convergence", dir_ / "report.txt"), 0);
  const std::string report = Slurp(dir_ / "report.txt");
  EXPECT_EQ(report.substr(0, report.find('\n')), "check\tseed\tresidual\tresult");
  EXPECT_NE(report.find("variance-identity\t"), std::string::npos);
  EXPECT_EQ(report.find("FAIL"), std::string::npos);
}

TEST_F(CliTest, Listings) {
  ASSERT_EQ(RunCli("list-strategies", dir_ / "s.txt"), 0);
  const std::string strategies = Slurp(dir_ / "s.txt");
  for (const char* name : {"qsigma(sigma=S)", "qsigma(decay=D)", "count-atb", "policy-atb", "sarsa", "expected-sarsa"}) {
    EXPECT_NE(strategies.find(name), std::string::npos) << name;
  }
  ASSERT_EQ(RunCli("list-envs", dir_ / "e.txt"), 0);
  const std::string envs = Slurp(dir_ / "e.txt");
  EXPECT_NE(envs.find("walk19"), std::string::npos);
  EXPECT_NE(envs.find("gridworld"), std::string::npos);
}

}  // namespace
