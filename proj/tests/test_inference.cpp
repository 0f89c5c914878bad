#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dtrjm/inference/diagnostics.hpp"
#include "dtrjm/inference/likelihood.hpp"
#include "dtrjm/inference/mcmc.hpp"
#include "dtrjm/inference/priors.hpp"
#include "dtrjm/inference/wishart.hpp"
#include "dtrjm/simulate/simulate.hpp"

using namespace dtrjm;

namespace {

PatientPath hand_path() {
  PatientPath p;
  p.visit_times = {0.0, 0.9, 2.1};
  p.outcomes = {1, 0, 1};
  p.covariates = {0.0, 0.45, -0.3};
  p.treatments = {1, 0, 1};
  p.censor_time = 3.7;
  return p;
}

JointParams hand_params() {
  auto p = JointParams::simulation_truth();
  p.phi_A << 0.2, -0.2, 0.2, 0.1;
  return p;
}

const RandomEffects kHandEffects{0.1, -0.2, 0.3};

McmcConfig quick_config(int chains, int iterations, int burn_in, int thin, std::uint64_t seed = 3) {
  McmcConfig c;
  c.chains = chains;
  c.iterations = iterations;
  c.burn_in = burn_in;
  c.thin = thin;
  c.seed = seed;
  return c;
}

std::vector<double> column(const PosteriorDraws& d, int k) {
  std::vector<double> out;
  for (const auto& p : d.params) out.push_back(flatten(p, d.spec)[static_cast<std::size_t>(k)]);
  return out;
}

double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }

double variance(const std::vector<double>& v) {
  const double m = mean(v);
  double s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return s / (v.size() - 1);
}

}  // namespace

// Expected values come from an independent scipy evaluation of the same
// hand-built path (norm, invgamma, invwishart, multivariate_normal).
TEST(JointLogPosterior, MatchesIndependentEvaluation) {
  const std::vector<PatientPath> data = {hand_path()};
  const std::vector<RandomEffects> u = {kHandEffects};
  const Priors pr;
  struct Case {
    const char* spec;
    double likelihood, posterior, prior;
  };
  const Case cases[] = {
      {"YAT", -8.438786525065797, -50.13752213514614, -40.54822661022399},
      {"YA", -5.799324609107799, -39.341004720016315, -32.510229787789804},
      {"YT", -6.031804078732531, -39.383100520847535, -32.597623896774074},
      {"Y", -3.392342162774533, -26.37815715328296, -22.522146525514188},
  };
  for (const auto& c : cases) {
    const auto spec = ModelSpec::parse(c.spec);
    EXPECT_NEAR(individual_log_likelihood(hand_params(), kHandEffects, data[0], spec).total(), c.likelihood, 1e-10)
        << c.spec;
    EXPECT_NEAR(log_prior(hand_params(), spec, pr), c.prior, 1e-9) << c.spec;
    EXPECT_NEAR(joint_log_posterior(hand_params(), u, data, spec, pr), c.posterior, 1e-9) << c.spec;
  }
}

TEST(JointLogPosterior, EmptyDataIsPrior) {
  const Priors pr;
  const auto p = hand_params();
  EXPECT_DOUBLE_EQ(joint_log_posterior(p, {}, {}, ModelSpec::full(), pr), log_prior(p, ModelSpec::full(), pr));
}

TEST(JointLogPosterior, SingleVisitOutcomeOnly) {
  PatientPath path;
  path.visit_times = {0.0};
  path.outcomes = {1};
  path.covariates = {0.0};
  path.censor_time = 3.6;
  const auto p = hand_params();
  const Priors pr;
  const RandomEffects u{0.0, 0.25, 0.0};
  const double expected = std::log(normal_cdf(p.phi_Y[0] + 0.25)) +
                          (-0.5 * std::log(2 * M_PI * p.Sigma(1, 1)) - 0.5 * 0.25 * 0.25 / p.Sigma(1, 1)) +
                          log_prior(p, ModelSpec::outcome_only(), pr);
  EXPECT_NEAR(joint_log_posterior(p, {u}, {path}, ModelSpec::outcome_only(), pr), expected, 1e-12);
}

TEST(JointLogPosterior, AdditiveOverIndividuals) {
  const auto d = generate_dataset(2, JointParams::simulation_truth(), 17);
  const Priors pr;
  const auto p = hand_params();
  const std::vector<RandomEffects> u = {kHandEffects, RandomEffects{-0.3, 0.4, 0.0}};
  for (const char* s : {"YAT", "YA", "YT", "Y"}) {
    const auto spec = ModelSpec::parse(s);
    const double both = joint_log_posterior(p, u, d.paths, spec, pr);
    const double one = joint_log_posterior(p, {u[0]}, {d.paths[0]}, spec, pr);
    const double two = joint_log_posterior(p, {u[1]}, {d.paths[1]}, spec, pr);
    EXPECT_NEAR(both, one + two - log_prior(p, spec, pr), 1e-10) << s;
  }
}

TEST(JointLogPosterior, Errors) {
  const auto p = hand_params();
  EXPECT_THROW(joint_log_posterior(p, {}, {hand_path()}, ModelSpec::full(), Priors{}), ModelError);
  auto bad = p;
  bad.Sigma(0, 0) = -1.0;
  EXPECT_THROW(joint_log_posterior(bad, {kHandEffects}, {hand_path()}, ModelSpec::full(), Priors{}), ModelError);
}

TEST(JointLogPosterior, CensoringTermDecreasesWithWindow) {
  auto path = hand_path();
  const auto spec = ModelSpec::full();
  double prev = 0.0;
  for (double zeta = 2.2; zeta < 6.0; zeta += 0.3) {
    path.censor_time = zeta;
    auto no_censor = path;
    const auto terms = individual_log_likelihood(hand_params(), kHandEffects, path, spec);
    // Isolate the survival factor by differencing against a path censored
    // right after the last visit.
    no_censor.censor_time = path.visit_times.back() + 1e-12;
    const double surv =
        terms.visits - individual_log_likelihood(hand_params(), kHandEffects, no_censor, spec).visits;
    EXPECT_LT(surv, prev);
    prev = surv;
  }
}

TEST(Wishart, LogDensityMatchesScipy) {
  Eigen::MatrixXd M(3, 3), P(3, 3);
  M << 1.2, 0.3, 0.1, 0.3, 0.8, -0.2, 0.1, -0.2, 0.5;
  P << 2.0, 0.5, 0.0, 0.5, 1.5, 0.3, 0.0, 0.3, 1.0;
  EXPECT_NEAR(log_inv_wishart_pdf(M, P, 6.5), -5.041943890675057, 1e-10);
}

TEST(UpdateSigma, ZeroEffectsMatchClosedFormMean) {
  const int n = 50;
  const std::vector<RandomEffects> u(n);
  Stream rng(5);
  Eigen::Matrix3d acc = Eigen::Matrix3d::Zero();
  const int draws = 20000;
  for (int k = 0; k < draws; ++k) acc += update_sigma(u, ModelSpec::full(), Priors{}, rng);
  acc /= draws;
  const Eigen::Matrix3d expected = Eigen::Matrix3d::Identity() / (n + 3.0 - 3.0 - 1.0);
  for (int r = 0; r < 3; ++r) {
    EXPECT_NEAR(acc(r, r) / expected(r, r), 1.0, 0.01);
    for (int c = 0; c < 3; ++c)
      if (r != c) {
        EXPECT_NEAR(acc(r, c), 0.0, 5e-4);
      }
  }
}

TEST(UpdateSigma, EmptyDataIsPriorDraw) {
  Stream rng(6);
  const auto S = update_sigma({}, ModelSpec::outcome_only(), Priors{}, rng);
  EXPECT_GT(S(kReW, kReW), 0.0);
  EXPECT_EQ(S(kReT, kReT), 0.0);
  EXPECT_EQ(S(kReA, kReW), 0.0);
}

TEST(UpdateSigma, DrawCovarianceMatchesAnalytic) {
  Eigen::MatrixXd Psi(3, 3);
  Psi << 2.0, 0.5, 0.2, 0.5, 1.5, 0.3, 0.2, 0.3, 1.0;
  const double nu = 20.0;
  const int p = 3, draws = 100000;
  Stream rng(7);
  std::vector<Eigen::MatrixXd> S;
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(3, 3);
  for (int k = 0; k < draws; ++k) {
    S.push_back(draw_inv_wishart(Psi, nu, rng));
    m += S.back();
  }
  m /= draws;
  const Eigen::MatrixXd mean_expected = Psi / (nu - p - 1);
  EXPECT_LT((m - mean_expected).cwiseAbs().maxCoeff() / mean_expected.cwiseAbs().maxCoeff(), 0.01);
  for (int i = 0; i < 3; ++i)
    for (int j = i; j < 3; ++j) {
      double v = 0;
      for (const auto& s : S) v += (s(i, j) - m(i, j)) * (s(i, j) - m(i, j));
      v /= draws - 1;
      const double expected = ((nu - p + 1) * Psi(i, j) * Psi(i, j) + (nu - p - 1) * Psi(i, i) * Psi(j, j)) /
                              ((nu - p) * (nu - p - 1) * (nu - p - 1) * (nu - p - 3));
      EXPECT_NEAR(v / expected, 1.0, 0.05) << i << j;
    }
}

TEST(Mcmc, CachesAgreeWithDirectEvaluation) {
  const auto d = generate_dataset(40, JointParams::simulation_truth(), 23);
  for (const char* s : {"YAT", "YA", "YT", "Y"}) {
    const auto spec = ModelSpec::parse(s);
    GibbsChain chain(d.paths, spec, Priors{}, quick_config(1, 400, 200, 1), 0);
    for (int it = 0; it < 400; ++it) chain.step(it);
    EXPECT_NEAR(chain.cached_log_posterior(),
                joint_log_posterior(chain.params(), chain.latent(), d.paths, spec, Priors{}), 1e-7)
        << s;
  }
}

TEST(Mcmc, DrawCountAndDeterminism) {
  const auto d = generate_dataset(30, JointParams::simulation_truth(), 29);
  auto cfg = quick_config(3, 300, 100, 7);
  const auto a = run_mcmc(d.paths, ModelSpec::full(), Priors{}, cfg);
  EXPECT_EQ(a.size(), 3 * (200 / 7));
  cfg.threads = 3;
  const auto b = run_mcmc(d.paths, ModelSpec::full(), Priors{}, cfg);
  EXPECT_EQ(draws_csv(a), draws_csv(b));
  EXPECT_EQ(a.acceptance.size(), 3u);
  EXPECT_TRUE(a.acceptance[0].count("phi_T"));
}

TEST(Mcmc, ConfigValidation) {
  EXPECT_THROW(quick_config(1, 100, 100, 1).validate(), ModelError);
  EXPECT_THROW(quick_config(1, 100, 10, 0).validate(), ModelError);
  EXPECT_THROW(quick_config(0, 100, 10, 1).validate(), ModelError);
}

// Under (Y) the likelihood never reads the censoring time or the treatment
// assigned at the final visit, so draws must be bit-identical.
TEST(Mcmc, OutcomeOnlyIgnoresExcludedColumns) {
  const auto d = generate_dataset(30, JointParams::simulation_truth(), 31);
  auto perturbed = d.paths;
  for (auto& p : perturbed) {
    p.censor_time += 5.0;
    p.treatments.back() = 1 - p.treatments.back();
  }
  const auto cfg = quick_config(1, 300, 100, 1);
  const auto a = run_mcmc(d.paths, ModelSpec::outcome_only(), Priors{}, cfg);
  const auto b = run_mcmc(perturbed, ModelSpec::outcome_only(), Priors{}, cfg);
  EXPECT_EQ(draws_csv(a), draws_csv(b));
  const auto c = run_mcmc(d.paths, ModelSpec::full(), Priors{}, cfg);
  const auto e = run_mcmc(perturbed, ModelSpec::full(), Priors{}, cfg);
  EXPECT_NE(draws_csv(c), draws_csv(e));
}

TEST(Mcmc, PriorOnlyRecoversCoefficientPrior) {
  auto cfg = quick_config(4, 250000, 5000, 10);
  const auto d = run_mcmc({}, ModelSpec::outcome_only(), Priors{}, cfg);
  ASSERT_GE(d.size(), 90000);
  for (int k = 0; k < 6; ++k) {
    const auto v = column(d, k);
    EXPECT_NEAR(mean(v), 0.0, 0.02 * 5.0) << k;
    EXPECT_NEAR(variance(v) / 25.0, 1.0, 0.02) << k;
  }
  // Kolmogorov-Smirnov distance of phi_Y0 to its N(0, 25) target.
  auto v = column(d, 0);
  std::sort(v.begin(), v.end());
  double ks = 0.0;
  const double n = static_cast<double>(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double F = normal_cdf(v[i] / 5.0);
    ks = std::max({ks, std::abs(F - i / n), std::abs(F - (i + 1) / n)});
  }
  EXPECT_LT(ks, 0.01);
}

TEST(Mcmc, ShortRunAgreesWithLongReference) {
  const auto d = generate_dataset(30, JointParams::simulation_truth(), 37);
  const auto spec = ModelSpec::outcome_only();
  const auto ref = run_mcmc(d.paths, spec, Priors{}, quick_config(4, 50000, 5000, 5, 100));
  const auto run = run_mcmc(d.paths, spec, Priors{}, quick_config(4, 5000, 1000, 1, 200));
  const auto per = split_by_chain(run);
  const auto v = column(run, 0);
  const double se = std::sqrt(variance(v) / effective_sample_size(per[0]));
  const auto r = column(ref, 0);
  const double se_ref = std::sqrt(variance(r) / effective_sample_size(split_by_chain(ref)[0]));
  EXPECT_LT(std::abs(mean(v) - mean(r)), 3.0 * std::hypot(se, se_ref));
}

TEST(Mcmc, RecoversOutcomeCoefficients) {
  const auto truth = JointParams::simulation_truth();
  const auto d = generate_dataset(300, truth, 41);
  const auto draws = run_mcmc(d.paths, ModelSpec::full(), Priors{}, quick_config(2, 6000, 3000, 5));
  int covered = 0;
  for (int k = 0; k < 6; ++k) {
    const auto v = column(draws, k);
    covered += std::abs(mean(v) - truth.phi_Y[k]) < 3.0 * std::sqrt(variance(v));
  }
  EXPECT_GE(covered, 5);
  for (const auto& pd : diagnostics(draws)) {
    ASSERT_TRUE(pd.rhat.has_value());
    EXPECT_LT(*pd.rhat, 1.2) << pd.name;
  }
}

TEST(Diagnostics, IidEss) {
  Stream rng(43);
  ChainSet chains(4);
  for (auto& c : chains)
    for (int i = 0; i < 5000; ++i) c.push_back(rng.normal());
  EXPECT_NEAR(effective_sample_size(chains) / 20000.0, 1.0, 0.1);
  ASSERT_TRUE(split_rhat(chains).has_value());
  EXPECT_NEAR(*split_rhat(chains), 1.0, 0.01);
}

TEST(Diagnostics, Ar1Ess) {
  Stream rng(47);
  const double rho = 0.5;
  ChainSet chains(4);
  for (auto& c : chains) {
    double x = rng.normal() / std::sqrt(1 - rho * rho);
    for (int i = 0; i < 20000; ++i) {
      x = rho * x + rng.normal();
      c.push_back(x);
    }
  }
  const double expected = 80000.0 * (1 - rho) / (1 + rho);
  EXPECT_NEAR(effective_sample_size(chains) / expected, 1.0, 0.15);
}

TEST(Diagnostics, DegenerateCases) {
  const ChainSet constant = {std::vector<double>(100, 1.0), std::vector<double>(100, 1.0)};
  EXPECT_FALSE(split_rhat(constant).has_value());
  const ChainSet single = {std::vector<double>(100, 0.0)};
  EXPECT_FALSE(split_rhat(single).has_value());
}

TEST(Diagnostics, DrawsCsvRoundTrip) {
  const auto d = generate_dataset(20, JointParams::simulation_truth(), 53);
  for (const char* s : {"YAT", "YA", "YT", "Y"}) {
    const auto draws = run_mcmc(d.paths, ModelSpec::parse(s), Priors{}, quick_config(2, 60, 20, 4));
    const auto back = parse_draws_csv(draws_csv(draws), draws.spec);
    EXPECT_EQ(draws_csv(back), draws_csv(draws)) << s;
    EXPECT_EQ(back.chains, 2);
  }
  EXPECT_THROW(parse_draws_csv("chain,iter,x\n", ModelSpec::full()), io::IoError);
}
