#pragma once

// Observational data generation and target-trial test histories.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "dtrjm/model/densities.hpp"
#include "dtrjm/model/features.hpp"
#include "dtrjm/model/link.hpp"
#include "dtrjm/model/types.hpp"
#include "dtrjm/rng.hpp"

namespace dtrjm {

/// Random-effect correlation patterns used by the study.
enum class Scenario { full_correlation, wa_indep_t, wt_indep_a, independent };

inline std::string scenario_name(Scenario s) {
  switch (s) {
    case Scenario::full_correlation: return "full";
    case Scenario::wa_indep_t: return "WA_indep_T";
    case Scenario::wt_indep_a: return "WT_indep_A";
    case Scenario::independent: return "independent";
  }
  return "?";
}

inline Scenario parse_scenario(const std::string& s) {
  if (s == "full") return Scenario::full_correlation;
  if (s == "WA_indep_T") return Scenario::wa_indep_t;
  if (s == "WT_indep_A") return Scenario::wt_indep_a;
  if (s == "independent") return Scenario::independent;
  throw ModelError("unknown scenario '" + s + "'");
}

/// Zeroes the covariances that the scenario declares independent.
inline Eigen::Matrix3d scenario_sigma(const Eigen::Matrix3d& base, Scenario s) {
  Eigen::Matrix3d S = base;
  auto cut = [&](int i, int j) { S(i, j) = S(j, i) = 0.0; };
  switch (s) {
    case Scenario::full_correlation: break;
    case Scenario::wa_indep_t: cut(kReT, kReW); cut(kReT, kReA); break;
    case Scenario::wt_indep_a: cut(kReA, kReW); cut(kReA, kReT); break;
    case Scenario::independent: cut(0, 1); cut(0, 2); cut(1, 2); break;
  }
  return S;
}

struct CensorWindow {
  double lower = 3.5;
  double upper = 4.0;
};

struct Dataset {
  std::vector<PatientPath> paths;
  JointParams true_params;
  std::uint64_t seed = 0;
  CensorWindow censor;

  [[nodiscard]] int size() const { return static_cast<int>(paths.size()); }
};

inline constexpr int kMaxVisits = 1'000'000;

/// Symmetric square root of a PSD matrix, so that degenerate covariances
/// (including the zero matrix) are allowed.
inline Eigen::Matrix3d psd_factor(const Eigen::Matrix3d& S) {
  Eigen::LLT<Eigen::Matrix3d> llt(S);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(S);
  const Eigen::Vector3d d = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * d.asDiagonal();
}

inline RandomEffects draw_random_effects(const Eigen::Matrix3d& Sigma, Stream& rng) {
  const Eigen::Vector3d z(rng.normal(), rng.normal(), rng.normal());
  return RandomEffects::from_vector(psd_factor(Sigma) * z);
}

namespace detail {
enum SimStream : std::uint64_t { kSimEffects = 1, kSimCensor, kSimOutcome, kSimCovariate, kSimTreatment, kSimGap };

inline double outcome_lin(const JointParams& p, double t, double x, int a_prev) {
  return p.phi_Y[0] + p.phi_Y[1] * t + p.phi_Y[2] * x + a_prev * (p.phi_Y[3] + p.phi_Y[4] * x + p.phi_Y[5] * t);
}

/// Weibull gap with S(g) = exp(-b g^alpha).
inline double draw_weibull_gap(double b, double alpha, Stream& rng) {
  return std::pow(-std::log(rng.uniform()) / b, 1.0 / alpha);
}
}  // namespace detail

/// Simulates one individual under the observational process. `rng` is the
/// individual's own stream; each process draws from a child of it.
inline PatientPath generate_individual(const JointParams& params, const Stream& rng,
                                       CensorWindow censor = {}, RandomEffects* effects_out = nullptr) {
  using namespace detail;
  Stream s_u = rng.child({kSimEffects});
  Stream s_c = rng.child({kSimCensor});
  Stream s_y = rng.child({kSimOutcome});
  Stream s_x = rng.child({kSimCovariate});
  Stream s_a = rng.child({kSimTreatment});
  Stream s_g = rng.child({kSimGap});

  const RandomEffects u = draw_random_effects(params.Sigma, s_u);
  if (effects_out) *effects_out = u;

  PatientPath p;
  p.censor_time = censor.lower + (censor.upper - censor.lower) * s_c.uniform();

  double t = 0.0, x = 0.0;
  int a_prev = 0;
  for (;;) {
    const int y = s_y.bernoulli(probit_prob(outcome_lin(params, t, x, a_prev) + u.u_W));
    p.visit_times.push_back(t);
    p.covariates.push_back(x);
    p.outcomes.push_back(y);

    const double a_lin = params.phi_A[0] + params.phi_A[1] * y + params.phi_A[2] * x + params.phi_A[3] * a_prev;
    const int a = s_a.bernoulli(probit_prob(a_lin + u.u_A));
    p.treatments.push_back(a);

    const double b = params.lambda * std::exp(u.u_T_log + params.phi_T[0] * x + params.phi_T[1] * a);
    const double t_next = t + draw_weibull_gap(b, params.alpha, s_g);
    if (t_next > p.censor_time) break;
    if (p.n_visits() >= kMaxVisits) throw ModelError("generate_individual: runaway visit process");

    x = s_x.normal(params.phi_X[0] * x + params.phi_X[1] * a, std::sqrt(params.tau_X2));
    t = t_next;
    a_prev = a;
  }
  return p;
}

inline Stream individual_stream(std::uint64_t seed, int index) {
  return Stream(seed, {static_cast<std::uint64_t>(Tag::individual), static_cast<std::uint64_t>(index)});
}

/// n independent individuals; individual i always uses substream i, so its
/// path does not depend on n.
inline Dataset generate_dataset(int n, const JointParams& params, std::uint64_t seed, CensorWindow censor = {}) {
  if (n < 1) throw ModelError("generate_dataset: n must be >= 1");
  if (!(censor.upper > censor.lower) || censor.lower < 0.0) throw ModelError("generate_dataset: bad censor window");
  Dataset d;
  d.true_params = params;
  d.seed = seed;
  d.censor = censor;
  d.paths.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) d.paths.push_back(generate_individual(params, individual_stream(seed, i), censor));
  return d;
}

struct TestHistory {
  History history;
  RandomEffects effects;
};

/// One-visit history at t_1 = 1 under the target trial: frailties from the
/// prior, x_1 from the covariate model with x_0 = a_0 = 0, y_1 from the
/// outcome model.
inline TestHistory generate_test_history(const JointParams& params, const Stream& rng) {
  using namespace detail;
  Stream s_u = rng.child({kSimEffects});
  Stream s_x = rng.child({kSimCovariate});
  Stream s_y = rng.child({kSimOutcome});
  TestHistory th;
  th.effects = draw_random_effects(params.Sigma, s_u);
  const double t1 = 1.0;
  const double x1 = s_x.normal(0.0, std::sqrt(params.tau_X2));
  const int y1 = s_y.bernoulli(probit_prob(outcome_lin(params, t1, x1, 0) + th.effects.u_W));
  th.history.visit_times = {t1};
  th.history.covariates = {x1};
  th.history.outcomes = {static_cast<double>(y1)};
  return th;
}

inline Stream test_history_stream(std::uint64_t seed, int index) {
  return Stream(seed, {static_cast<std::uint64_t>(Tag::test_history), static_cast<std::uint64_t>(index)});
}

/// The two fixed one-visit profiles of the simulation study (time 1).
inline History patient_profile(int which) {
  History h;
  h.visit_times = {1.0};
  if (which == 1) {
    h.covariates = {-0.35};
    h.outcomes = {1.0};
  } else if (which == 2) {
    h.covariates = {0.35};
    h.outcomes = {0.0};
  } else {
    throw ModelError("patient_profile: profile must be 1 or 2");
  }
  return h;
}

}  // namespace dtrjm
