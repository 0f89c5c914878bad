#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

const fs::path kRoot = fs::temp_directory_path() / "dtrjm_cli_test";

int run(const std::string& args) {
  const std::string cmd = std::string(DTRJM_CLI) + " " + args + " >/dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::map<std::string, std::string> tree(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = slurp(e.path());
  return out;
}

void write(const fs::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    fs::remove_all(kRoot);
    fs::create_directories(kRoot);
    ASSERT_EQ(run("simulate --n 40 --seed 5 --out " + (kRoot / "data").string()), 0);
    write(kRoot / "fit.json", R"({"spec": "YA", "mcmc": {"chains": 2, "iterations": 300, "burn_in": 100, "thin": 2}})");
    ASSERT_EQ(run("fit --config " + (kRoot / "fit.json").string() + " --data " + (kRoot / "data/dataset.csv").string() +
                  " --seed 9 --out " + (kRoot / "fit").string()),
              0);
  }

  /// Runs the same command into two directories and compares every file.
  static void expect_reproducible(const std::string& name, const std::string& args, const std::string& second = "") {
    const auto a = kRoot / (name + "_a"), b = kRoot / (name + "_b");
    ASSERT_EQ(run(args + " --out " + a.string()), 0) << args;
    ASSERT_EQ(run(args + " " + second + " --out " + b.string()), 0) << args;
    const auto ta = tree(a), tb = tree(b);
    ASSERT_FALSE(ta.empty());
    ASSERT_EQ(ta.size(), tb.size());
    for (const auto& [file, bytes] : ta) {
      ASSERT_TRUE(tb.count(file)) << file;
      EXPECT_EQ(bytes, tb.at(file)) << name << ": " << file << " differs";
    }
  }
};

TEST_F(Cli, SimulateIsReproducible) { expect_reproducible("simulate", "simulate --n 30 --seed 2"); }

TEST_F(Cli, FitIsReproducibleAcrossThreadCounts) {
  expect_reproducible("fit",
                      "fit --data " + (kRoot / "data/dataset.csv").string() +
                          " --spec YAT --chains 2 --iterations 200 --burn-in 100 --seed 3",
                      "--threads 2");
}

TEST_F(Cli, RewardIsReproducible) {
  expect_reproducible("reward_truth", "reward --truth --profile patient2 --regime 1,0 --rollouts 2000 --seed 4");
  expect_reproducible("reward_draws", "reward --draws " + (kRoot / "fit/draws.csv").string() +
                                          " --regime optimal --max-draws 8 --rollouts 300 --seed 4",
                      "--threads 2");
}

TEST_F(Cli, OptimizeIsReproducible) {
  expect_reproducible("optimize", "optimize --truth --profile patient1 --times 2,3 --gamma 1,0.5 --rollouts 2000");
}

TEST_F(Cli, StudyIsReproducibleAcrossThreadCounts) {
  write(kRoot / "study.json",
        R"({"n_train": 20, "n_test": 3, "replications": 2, "specs": ["Y", "YA"],
            "mcmc": {"chains": 2, "iterations": 300, "burn_in": 100, "thin": 2},
            "rollouts": 100, "max_draws": 4, "truth_rollouts": 1000,
            "test_rollouts": 50, "test_draws": 3, "test_truth_rollouts": 300})");
  expect_reproducible("study", "study --config " + (kRoot / "study.json").string() + " --seed 8", "--threads 3");
}

TEST_F(Cli, McErrorIsReproducible) {
  expect_reproducible("mc_error", "mc-error --synthetic --S 6 --B 5 --R 4 --seed 12");
  expect_reproducible("mc_error_input", "mc-error --input " + (kRoot / "mc_error_a/nested.csv").string());
}

TEST_F(Cli, RunRecordCarriesSeedAndHash) {
  ASSERT_EQ(run("simulate --n 5 --seed 77 --out " + (kRoot / "rec").string()), 0);
  const auto rec = slurp(kRoot / "rec/simulate_run.json");
  EXPECT_NE(rec.find("\"seed\": 77"), std::string::npos);
  EXPECT_NE(rec.find("\"config_hash\""), std::string::npos);
}

TEST_F(Cli, ExitCodes) {
  EXPECT_EQ(run("--version"), 0);
  EXPECT_EQ(run(""), 1);
  EXPECT_EQ(run("simulate --n notanumber"), 1);
  EXPECT_EQ(run("fit --spec XYZ --data " + (kRoot / "data/dataset.csv").string()), 1);
  EXPECT_EQ(run("fit --data " + (kRoot / "missing.csv").string()), 1);
  EXPECT_EQ(run("reward --profile patient1"), 1);
  EXPECT_EQ(run("reward --truth --regime 0,1,1"), 1);
  write(kRoot / "unknown.json", R"({"n": 3, "typo": true})");
  EXPECT_EQ(run("simulate --config " + (kRoot / "unknown.json").string()), 1);
  write(kRoot / "broken.json", "{\"n\": ");
  EXPECT_EQ(run("simulate --config " + (kRoot / "broken.json").string()), 1);
  write(kRoot / "degenerate.csv", "s,b,r,value\n0,0,0,1\n");
  EXPECT_EQ(run("mc-error --input " + (kRoot / "degenerate.csv").string()), 1);
}

}  // namespace
