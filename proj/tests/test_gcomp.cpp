#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "dtrjm/gcomp/posterior.hpp"
#include "dtrjm/gcomp/re_sampler.hpp"
#include "dtrjm/gcomp/reward.hpp"
#include "dtrjm/simulate/simulate.hpp"
#include "grid_family.hpp"

using namespace dtrjm;
using dtrjm::testing::GridFamily;

namespace {

// Rewards at the data-generating parameters for the two study profiles
// (future visits 2 and 3, unit weights), computed by nested adaptive
// quadrature over u_W and the next covariate.
constexpr double kP1Fixed[4] = {1.443637, 1.120896, 1.302729, 0.956469};  // (0,0) (0,1) (1,0) (1,1)
constexpr double kP2Fixed[4] = {1.147558, 0.796253, 0.960341, 0.584146};
constexpr double kP1Optimal = 1.4436369794332786;
constexpr double kP2Optimal = 1.1475576801905718;

History one_visit(double t, double x, double y) {
  History h;
  h.visit_times = {t};
  h.covariates = {x};
  h.outcomes = {y};
  return h;
}

double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }

}  // namespace

TEST(ReSampler, LogRatioIdentities) {
  const auto p = JointParams::simulation_truth();
  const History h = patient_profile(1);
  EXPECT_DOUBLE_EQ(re_posterior_log_ratio(0.3, 0.3, h, p), 0.0);
  EXPECT_NEAR(re_posterior_log_ratio(0.7, -0.2, h, p), -re_posterior_log_ratio(-0.2, 0.7, h, p), 1e-13);

  // One visit at t = 1 with x = -0.35, y = 1 and no prior treatment.
  const double lin = -0.3 + 0.3 * 1.0 + 0.3 * -0.35;
  const double s2 = 0.36, a = 0.7, b = -0.2;
  const double hand = std::log(normal_cdf(lin + a)) - std::log(normal_cdf(lin + b)) - 0.5 * (a * a - b * b) / s2;
  EXPECT_NEAR(re_posterior_log_ratio(a, b, h, p), hand, 1e-12);
}

TEST(ReSampler, EmptyHistoryReproducesPrior) {
  const SimFamily fam(JointParams::simulation_truth());
  Stream rng(11);
  ReSamplerStats st;
  const auto u = sample_re_conditional(History{}, fam, 100000, rng, 100, &st);
  EXPECT_EQ(st.accepted, st.proposals);
  const double m = mean(u);
  double v = 0.0;
  for (double x : u) v += (x - m) * (x - m);
  v /= u.size() - 1;
  EXPECT_NEAR(m, 0.0, 4.0 * 0.6 / std::sqrt(1e5));
  EXPECT_NEAR(v / 0.36, 1.0, 0.02);
}

TEST(ReSampler, ConditionalMeanMatchesQuadrature) {
  const auto p = JointParams::simulation_truth();
  const SimFamily fam(p);
  History h;
  for (int j = 1; j <= 20; ++j) {
    h.visit_times.push_back(j);
    h.covariates.push_back(0.0);
    h.outcomes.push_back(1.0);
    if (j > 1) h.treatments.push_back(0);
  }
  // Reference posterior mean on a fine grid.
  double num = 0.0, den = 0.0;
  for (int i = -4000; i <= 4000; ++i) {
    const double u = i * 1e-3;
    const double w = std::exp(history_log_likelihood(fam, h, u) - 0.5 * u * u / 0.36);
    num += u * w;
    den += w;
  }
  const double ref = num / den;
  ASSERT_GT(ref, 0.0);

  Stream rng(5);
  const auto u = sample_re_conditional(h, fam, 40000, rng);
  const auto s = detail::summarize(u, 40);
  EXPECT_GT(s.mean, 0.0);
  EXPECT_NEAR(s.mean, ref, 3.0 * s.batch_se);
}

TEST(ReSampler, OneVisitMomentsMatchQuadrature) {
  const SimFamily fam(JointParams::simulation_truth());
  const History h = patient_profile(1);
  double m0 = 0.0, m1 = 0.0, m2 = 0.0;
  for (int i = -6000; i <= 6000; ++i) {
    const double u = i * 1e-3;
    const double w = std::exp(history_log_likelihood(fam, h, u) - 0.5 * u * u / 0.36);
    m0 += w;
    m1 += u * w;
    m2 += u * u * w;
  }
  const double ref_mean = m1 / m0, ref_var = m2 / m0 - ref_mean * ref_mean;

  Stream rng(19);
  const auto u = sample_re_conditional(h, fam, 100000, rng);
  std::vector<double> sq(u.size());
  const auto s1 = detail::summarize(u, 50);
  for (std::size_t i = 0; i < u.size(); ++i) sq[i] = (u[i] - ref_mean) * (u[i] - ref_mean);
  const auto s2 = detail::summarize(sq, 50);
  EXPECT_NEAR(s1.mean, ref_mean, 3.0 * s1.batch_se);
  EXPECT_NEAR(s2.mean, ref_var, 3.0 * s2.batch_se);
}

TEST(ReSampler, RejectsEmptyRequestAndHandlesDegenerateVariance) {
  auto p = JointParams::simulation_truth();
  Stream rng(1);
  EXPECT_THROW(sample_re_conditional(patient_profile(1), SimFamily(p), 0, rng), ModelError);
  p.Sigma.setZero();
  const auto u = sample_re_conditional(patient_profile(1), SimFamily(p), 10, rng);
  for (double v : u) EXPECT_EQ(v, 0.0);
}

TEST(GaussHermite, Moments) {
  const GaussHermite gh(40);
  double w0 = 0.0, w2 = 0.0, w4 = 0.0;
  for (std::size_t i = 0; i < gh.nodes.size(); ++i) {
    const double x = gh.nodes[i];
    w0 += gh.weights[i];
    w2 += gh.weights[i] * x * x;
    w4 += gh.weights[i] * x * x * x * x;
  }
  EXPECT_NEAR(w0, std::sqrt(M_PI), 1e-12);
  EXPECT_NEAR(w2, std::sqrt(M_PI) / 2.0, 1e-12);
  EXPECT_NEAR(w4, 3.0 * std::sqrt(M_PI) / 4.0, 1e-11);
}

TEST(Reward, ZeroWeightsGiveZero) {
  const SimFamily fam(JointParams::simulation_truth());
  const auto e = reward_fixed(patient_profile(1), Regime::fixed({1, 0}, {2, 3}, {0, 0}), fam, 200, Stream(3));
  EXPECT_EQ(e.value, 0.0);
  const auto [plan, o] = reward_optimal(patient_profile(1), Regime::optimal({2, 3}, {0, 0}), fam, 200, Stream(3));
  EXPECT_EQ(o.value, 0.0);
  EXPECT_EQ(plan.first_action, 0);
}

TEST(Reward, OneStageWithoutFrailtyIsClosedForm) {
  auto p = JointParams::simulation_truth();
  p.Sigma.setZero();
  const SimFamily fam(p);
  const History h = patient_profile(2);
  for (int a : {0, 1}) {
    const double t = 2.0;
    const double c = -0.3 + 0.3 * t + a * (0.55 - 0.5 * t);
    const double b = 0.3 - 0.5 * a;
    const double m = 0.4 * 0.35 + 0.4 * a;
    const double closed = normal_cdf((c + b * m) / std::sqrt(1.0 + b * b * 0.3));
    const auto e = reward_fixed(h, Regime::fixed({a}, {t}), fam, 50, Stream(2));
    EXPECT_NEAR(e.value, closed, 1e-14);
    EXPECT_NEAR(e.mc_std_error, 0.0, 1e-14);

    // Plain Monte Carlo through sampled marks agrees.
    Stream rng(20 + a);
    double hits = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) hits += fam.sample_mark(h, t, a, 0.0, rng).y;
    EXPECT_NEAR(hits / n, closed, 4.0 * std::sqrt(closed * (1 - closed) / n));
  }
}

TEST(Reward, ProfileFixedRegimesMatchReference) {
  const SimFamily fam(JointParams::simulation_truth());
  const int codes[4][2] = {{0, 0}, {0, 1}, {1, 0}, {1, 1}};
  for (int prof : {1, 2}) {
    const auto* ref = prof == 1 ? kP1Fixed : kP2Fixed;
    for (int k = 0; k < 4; ++k) {
      const auto e = reward_fixed(patient_profile(prof), Regime::fixed({codes[k][0], codes[k][1]}, {2, 3}), fam,
                                  20000, Stream(100 + prof, {static_cast<std::uint64_t>(k)}));
      EXPECT_NEAR(e.value, ref[k], 3.0 * e.batch_std_error + 1e-6) << "profile " << prof << " regime " << k;
    }
  }
}

TEST(Reward, ProfileOptimumMatchesReference) {
  const SimFamily fam(JointParams::simulation_truth());
  for (int prof : {1, 2}) {
    const auto [plan, e] = reward_optimal(patient_profile(prof), Regime::optimal({2, 3}), fam, 20000, Stream(7));
    const double ref = prof == 1 ? kP1Optimal : kP2Optimal;
    EXPECT_EQ(plan.first_action, 0);
    EXPECT_NEAR(e.value, ref, 3.0 * e.batch_std_error + 1e-6) << "profile " << prof;
    // The never-treat course dominates at these parameters.
    EXPECT_GT(plan.course_table().front().second, 0.99);
    EXPECT_EQ(plan.course_table().front().first, (std::vector<int>{0, 0}));
  }
}

TEST(Reward, GridFamilyMatchesExactDynamicProgramming) {
  Stream draw(2024);
  for (int c = 0; c < 8; ++c) {
    GridFamily f;
    for (int i = 0; i < 6; ++i) f.phi_Y[i] = draw.normal(0.0, 0.6);
    f.phi_X0 = -0.8 + 1.6 * draw.uniform();
    f.phi_X1 = -0.8 + 1.6 * draw.uniform();
    f.tau2 = 0.1 + 0.9 * draw.uniform();
    f.sigma2 = 0.1 + 0.9 * draw.uniform();
    const double x1 = GridFamily::kGrid[static_cast<std::size_t>(draw.uniform() * 5)];
    const double y1 = draw.bernoulli(0.5);
    const auto exact = dtrjm::testing::grid_dp_two_stage(f, x1, y1, 1.0, 2.0, 3.0);

    const auto [plan, e] = reward_optimal(one_visit(1.0, x1, y1), Regime::optimal({2, 3}), f, 20000,
                                          Stream(9, {static_cast<std::uint64_t>(c)}));
    ASSERT_EQ(e.arms, (std::vector<int>{0, 1}));
    for (int a = 0; a < 2; ++a)
      EXPECT_NEAR(e.arm_values[a], exact[a], 3.0 * e.arm_std_errors[a] + 1e-4) << "case " << c << " arm " << a;
    const double best = std::max(exact[0], exact[1]);
    EXPECT_NEAR(e.value, best, 3.0 * e.batch_std_error + 0.01) << "case " << c;
    if (std::abs(exact[0] - exact[1]) > 0.05) {
      EXPECT_EQ(plan.first_action, exact[1] > exact[0] ? 1 : 0);
    }
  }
}

TEST(Reward, OptimumDominatesFixedRegimes) {
  GridFamily f;
  f.phi_Y << 0.1, -0.2, 0.5, 0.4, -0.6, 0.1;
  f.phi_X0 = 0.5;
  f.phi_X1 = -0.4;
  f.tau2 = 0.4;
  f.sigma2 = 0.5;
  const History h = one_visit(1.0, 0.5, 1.0);
  const Stream rng(77);
  const auto [plan, opt] = reward_optimal(h, Regime::optimal({2, 3}), f, 20000, rng);
  for (int a1 : {0, 1})
    for (int a2 : {0, 1}) {
      const auto e = reward_fixed(h, Regime::fixed({a1, a2}, {2, 3}), f, 20000, rng);
      EXPECT_GE(opt.value, e.value - 3.0 * (e.batch_std_error + opt.batch_std_error));
    }
}

TEST(Reward, ScalingWeightsScalesValueAndKeepsPlan) {
  const SimFamily fam(JointParams::simulation_truth());
  const History h = patient_profile(1);
  const auto [p1, e1] = reward_optimal(h, Regime::optimal({2, 3, 4}, {1.0, 0.5, 2.0}), fam, 300, Stream(4));
  const auto [p2, e2] = reward_optimal(h, Regime::optimal({2, 3, 4}, {3.0, 1.5, 6.0}), fam, 300, Stream(4));
  EXPECT_EQ(p1.first_action, p2.first_action);
  EXPECT_EQ(p1.courses, p2.courses);
  EXPECT_NEAR(e2.value, 3.0 * e1.value, 1e-10);
}

TEST(Reward, TreatmentCapForcesNoTreatment) {
  const SimFamily fam(JointParams::simulation_truth());
  History h;
  h.visit_times = {0.2, 0.5, 0.8, 1.0};
  h.covariates = {0.0, 0.2, 0.1, -0.35};
  h.outcomes = {0.0, 1.0, 0.0, 1.0};
  h.treatments = {1, 1, 1};
  const auto [plan, e] =
      reward_optimal(h, Regime::optimal({2, 3, 4}, {}, FeasibleSet{CapTotal{3}}), fam, 50, Stream(8));
  EXPECT_EQ(e.arms, (std::vector<int>{0}));
  for (auto c : plan.courses) EXPECT_EQ(c, 0u);
  EXPECT_THROW(reward_fixed(h, Regime{FixedRegime{{0, 1, 0}}, {2, 3, 4}, {1, 1, 1}, FeasibleSet{CapTotal{3}}}, fam,
                            10, Stream(8)),
               ModelError);
}

TEST(Reward, RecursionConsistency) {
  // R_1 = gamma_2 E[Y_2] + E[R_2(h_2)] with h_2 simulated one stage ahead.
  const SimFamily fam(JointParams::simulation_truth());
  const History h = patient_profile(1);
  const Stream rng(55);
  const auto whole = reward_fixed(h, Regime::fixed({1, 0}, {2, 3}), fam, 20000, rng);

  const int splits = 4000;
  Stream chain = rng.child({1});
  const auto us = sample_re_conditional(h, fam, splits, chain);
  std::vector<double> parts(splits);
  for (int i = 0; i < splits; ++i) {
    Stream si = rng.child({2, static_cast<std::uint64_t>(i)});
    History h2 = h;
    const Mark w = fam.sample_mark(h, 2.0, 1, us[static_cast<std::size_t>(i)], si);
    extend_history(h2, 1, 2.0, w);
    const auto rest = reward_fixed(h2, Regime::fixed({0}, {3}), fam, 20, si.child({3}));
    parts[static_cast<std::size_t>(i)] = w.y + rest.value;
  }
  const auto split = detail::summarize(parts, 20);
  EXPECT_NEAR(whole.value, split.mean, 3.0 * std::hypot(whole.batch_std_error, split.batch_se));
}

TEST(Reward, NormalisedValueInUnitInterval) {
  const SimFamily fam(JointParams::simulation_truth());
  const std::vector<double> g(3, 1.0 / 3.0);
  const auto [plan, e] = reward_optimal(patient_profile(2), Regime::optimal({1.5, 2.5, 3.5}, g), fam, 100, Stream(6));
  EXPECT_GE(e.value, 0.0);
  EXPECT_LE(e.value, 1.0);
}

TEST(Reward, PinnedFirstActionMatchesArm) {
  const SimFamily fam(JointParams::simulation_truth());
  const History h = patient_profile(1);
  const auto [plan, all] = reward_optimal(h, Regime::optimal({2, 3}), fam, 500, Stream(12));
  for (int a : {0, 1}) {
    const auto [pp, one] = reward_optimal(h, Regime::optimal({2, 3}), fam, 500, Stream(12), {}, a);
    EXPECT_EQ(pp.first_action, a);
    EXPECT_DOUBLE_EQ(one.value, all.arm_values[static_cast<std::size_t>(a)]);
  }
}

TEST(Reward, DeterministicPerStream) {
  const SimFamily fam(JointParams::simulation_truth());
  const auto a = reward_optimal(patient_profile(1), Regime::optimal({2, 3}), fam, 300, Stream(1)).second;
  const auto b = reward_optimal(patient_profile(1), Regime::optimal({2, 3}), fam, 300, Stream(1)).second;
  const auto c = reward_optimal(patient_profile(1), Regime::optimal({2, 3}), fam, 300, Stream(2)).second;
  EXPECT_EQ(a.value, b.value);
  EXPECT_NE(a.value, c.value);
}

TEST(Reward, MeanMarkVariantAgreesOnOneStage) {
  const SimFamily fam(JointParams::simulation_truth());
  RewardOptions mm;
  mm.mean_mark = true;
  const auto [pa, a] = reward_optimal(patient_profile(1), Regime::optimal({2}), fam, 20000, Stream(3));
  const auto [pb, b] = reward_optimal(patient_profile(1), Regime::optimal({2}), fam, 20000, Stream(3), mm);
  EXPECT_EQ(pa.first_action, pb.first_action);
  EXPECT_NEAR(a.value, b.value, 3.0 * std::hypot(a.batch_std_error, b.batch_std_error));
  // Two stages: a single course for every rollout.
  const auto [pc, c] = reward_optimal(patient_profile(1), Regime::optimal({2, 3}), fam, 2000, Stream(3), mm);
  EXPECT_EQ(pc.course_table().size(), 1u);
  EXPECT_NEAR(c.value, kP1Optimal, 0.05);
}

TEST(Reward, InvalidInputsThrow) {
  const SimFamily fam(JointParams::simulation_truth());
  const History h = patient_profile(1);
  EXPECT_THROW(reward_optimal(h, Regime::optimal({0.5, 3}), fam, 10, Stream(1)), ModelError);
  EXPECT_THROW(reward_optimal(h, Regime::optimal({2, 3}, {1.0}), fam, 10, Stream(1)), ModelError);
  EXPECT_THROW(reward_optimal(h, Regime::fixed({0, 0}, {2, 3}), fam, 10, Stream(1)), ModelError);
  EXPECT_THROW(reward_fixed(h, Regime::fixed({0}, {2, 3}), fam, 10, Stream(1)), ModelError);
  EXPECT_THROW(reward_fixed(h, Regime::fixed({0, 0}, {2, 3}), fam, 0, Stream(1)), ModelError);
}

TEST(Posterior, ThinIndices) {
  EXPECT_EQ(thin_indices(5, 0), (std::vector<int>{0, 1, 2, 3, 4}));
  EXPECT_EQ(thin_indices(10, 4), (std::vector<int>{0, 2, 5, 7}));
  EXPECT_EQ(thin_indices(3, 10).size(), 3u);
}

TEST(Posterior, SingleDrawReducesToDirectEvaluation) {
  const auto p = JointParams::simulation_truth();
  const Stream rng(31);
  const auto pr = posterior_reward(patient_profile(1), Regime::optimal({2, 3}), {p}, 400, rng);
  const auto [plan, e] = reward_optimal(patient_profile(1), Regime::optimal({2, 3}), SimFamily(p), 400,
                                        rng.child({static_cast<std::uint64_t>(Tag::posterior_draw), 0}));
  EXPECT_EQ(pr.mean, e.value);
  EXPECT_EQ(pr.sd, 0.0);
  EXPECT_EQ(pr.recommended_first_action, plan.first_action);
}

TEST(Posterior, IdenticalDrawsSpreadOnlyByMonteCarlo) {
  const auto p = JointParams::simulation_truth();
  const std::vector<JointParams> draws(30, p);
  const auto pr = posterior_reward(patient_profile(2), Regime::fixed({0, 0}, {2, 3}), draws, 2000, Stream(8));
  double se = 0.0;
  for (const auto& e : pr.per_draw) se += e.batch_std_error / draws.size();
  EXPECT_GT(pr.sd, 0.4 * se);
  EXPECT_LT(pr.sd, 2.5 * se);
  EXPECT_NEAR(pr.mean, kP2Fixed[0], 4.0 * pr.sd / std::sqrt(30.0));
}

TEST(Posterior, IndependentOfThreadCount) {
  auto p = JointParams::simulation_truth();
  std::vector<JointParams> draws;
  for (int b = 0; b < 6; ++b) {
    p.phi_Y[3] = 0.4 + 0.05 * b;
    draws.push_back(p);
  }
  const auto a = posterior_reward(patient_profile(1), Regime::optimal({2, 3}), draws, 200, Stream(4), {}, 0, 1);
  const auto b = posterior_reward(patient_profile(1), Regime::optimal({2, 3}), draws, 200, Stream(4), {}, 0, 3);
  EXPECT_EQ(a.values(), b.values());
  EXPECT_EQ(a.first_actions, b.first_actions);
}
