#include <gtest/gtest.h>

#include <filesystem>
#include <string>

#include "dtrjm/io/text.hpp"
#include "dtrjm/study/report.hpp"
#include "dtrjm/study/study.hpp"

using namespace dtrjm;
namespace fs = std::filesystem;

namespace {

StudyConfig tiny() {
  StudyConfig c;
  c.n_train = 20;
  c.n_test = 3;
  c.replications = 1;
  c.specs = {ModelSpec::parse("Y")};
  c.mcmc.chains = 2;
  c.mcmc.iterations = 400;
  c.mcmc.burn_in = 200;
  c.mcmc.thin = 4;
  c.rollouts = 40;
  c.max_draws = 6;
  c.truth_rollouts = 2000;
  c.test_rollouts = 20;
  c.test_draws = 3;
  c.test_truth_rollouts = 200;
  c.seed = 42;
  return c;
}

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("dtrjm_study_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST(Study, SmokeRunHasAllColumns) {
  const auto r = run_study(tiny());
  EXPECT_TRUE(r.failures.empty());
  ASSERT_EQ(r.replications.size(), 1u);
  ASSERT_TRUE(r.replications[0].fits[0].ok);
  EXPECT_EQ(r.summary.size(), 5u);  // 2 profiles x 2 regimes + test set
  ASSERT_NE(r.row("Y", "patient1", "optimal"), nullptr);
  ASSERT_NE(r.row("Y", "test", "optimal"), nullptr);
  EXPECT_TRUE(r.row("Y", "patient1", "optimal")->agreement_rate.has_value());
  EXPECT_FALSE(r.row("Y", "patient1", "never_treated")->agreement_rate.has_value());

  const auto csv = io::summary_csv(r);
  const auto header = csv.substr(0, csv.find('\n'));
  for (const char* col : {"scenario", "spec", "n", "profile", "regime", "bias", "mc_error", "se_mc", "avg_se",
                          "agreement_rate", "term_draw", "term_rollout"})
    EXPECT_NE(header.find(col), std::string::npos) << col;
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 6);
}

TEST(Study, DeterministicAcrossRunsAndThreads) {
  auto c = tiny();
  c.replications = 2;
  c.specs = {ModelSpec::parse("Y"), ModelSpec::parse("YA")};
  const auto a = run_study(c);
  c.threads = 3;
  const auto b = run_study(c);
  EXPECT_EQ(io::summary_csv(a), io::summary_csv(b));
  EXPECT_EQ(io::posterior_csv(a), io::posterior_csv(b));
  EXPECT_EQ(io::test_set_csv(a), io::test_set_csv(b));
}

TEST(Study, SpecSubsetDoesNotChangeSharedResults) {
  auto c = tiny();
  const auto only = run_study(c);
  c.specs = {ModelSpec::parse("YA"), ModelSpec::parse("Y")};
  const auto both = run_study(c);
  EXPECT_EQ(only.row("Y", "patient2", "optimal")->mean_estimate, both.row("Y", "patient2", "optimal")->mean_estimate);
}

TEST(Study, ExportIsIdempotent) {
  const auto r = run_study(tiny());
  const auto d1 = scratch("a"), d2 = scratch("b");
  const auto files = io::export_report(r, d1);
  io::export_report(r, d2);
  io::export_report(r, d1);
  for (const auto& f : files) {
    ASSERT_TRUE(fs::exists(d1 / f)) << f;
    EXPECT_EQ(io::read_file((d1 / f).string()), io::read_file((d2 / f).string())) << f;
  }
  for (const char* f : {"config.json", "data/rep_0.csv", "draws/rep_0_Y.csv", "metrics/summary.csv", "manifest.json"})
    EXPECT_TRUE(fs::exists(d1 / f)) << f;
  fs::remove_all(d1);
  fs::remove_all(d2);
}

TEST(Study, ManifestRoundTripsThroughConfigParser) {
  auto c = tiny();
  c.scenario = Scenario::wt_indep_a;
  c.gamma = {0.5, 2.0};
  const auto r = run_study(c);
  const auto m = io::manifest(r, {});
  const auto back = io::study_config_from_json(m.at("config"));
  EXPECT_EQ(io::to_json(back).dump(), io::to_json(c).dump());
  EXPECT_EQ(m.at("config_hash").get<std::string>(), io::config_hash(io::to_json(back)));
}

TEST(Study, ConfigParserIsStrict) {
  using io::ordered_json;
  EXPECT_THROW(io::study_config_from_json(ordered_json::parse(R"({"n_trian": 3})")), io::IoError);
  EXPECT_THROW(io::study_config_from_json(ordered_json::parse(R"({"n_train": "3"})")), io::IoError);
  EXPECT_THROW(io::study_config_from_json(ordered_json::parse(R"({"specs": ["YAX"]})")), io::IoError);
  EXPECT_THROW(io::study_config_from_json(ordered_json::parse(R"({"mcmc": {"seed": 3}})")), io::IoError);
  EXPECT_THROW(io::study_config_from_json(ordered_json::parse(R"({"mcmc": {"chain": 3}})")), io::IoError);
  EXPECT_THROW(io::study_config_from_json(ordered_json::parse(R"({"scenario": "partial"})")), io::IoError);
  const auto c = io::study_config_from_json(ordered_json::parse(R"({"n_train": 50, "specs": ["YT", "Y"]})"));
  EXPECT_EQ(c.n_train, 50);
  EXPECT_EQ(c.specs.size(), 2u);
  try {
    io::study_config_from_json(ordered_json::parse(R"({"reward": {"warmup": 1.5}})"));
    FAIL();
  } catch (const io::IoError& e) {
    EXPECT_NE(std::string(e.what()).find("study.reward.warmup"), std::string::npos);
  }
}

TEST(Study, FailedFitIsRecordedNotThrown) {
  const auto c = tiny();
  Replication rep;
  rep.index = 0;
  rep.data = generate_dataset(5, c.truth(), 1);
  rep.data.paths[2].treatments[0] = 7;
  const auto f = fit_and_evaluate(c, rep, ModelSpec::parse("Y"), TestTruth{});
  EXPECT_FALSE(f.ok);
  EXPECT_FALSE(f.error.empty());
  const auto rows = summarize_study(c, profile_truth(c), TestTruth{}, {Replication{0, rep.data, {f}}});
  EXPECT_EQ(rows.front().replications, 0);
}

TEST(Study, ValidationRejectsBadConfigs) {
  auto c = tiny();
  c.specs = {ModelSpec::parse("Y"), ModelSpec::parse("Y")};
  EXPECT_THROW(c.validate(), ModelError);
  c = tiny();
  c.future_times = {0.5, 3.0};
  EXPECT_THROW(c.validate(), ModelError);
  c = tiny();
  c.profiles = {3};
  EXPECT_THROW(c.validate(), ModelError);
}
