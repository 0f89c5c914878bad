#pragma once

// Regressor vectors of the simulation-study model and the state variables
// of the dose-response family.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

#include "dtrjm/model/types.hpp"

namespace dtrjm {

namespace detail {

template <class H>
double outcome_at(const H& h, int j) {
  return static_cast<double>(h.outcomes[static_cast<std::size_t>(j - 1)]);
}

/// a_j with a_0 = 0.
template <class H>
int treatment_at(const H& h, int j) {
  if (j <= 0) return 0;
  if (static_cast<std::size_t>(j) > h.treatments.size()) throw ModelError("features: treatment a_" + std::to_string(j) + " not in history");
  return h.treatments[static_cast<std::size_t>(j - 1)];
}

/// x_j with x_0 = 0.
template <class H>
double covariate_at(const H& h, int j) {
  if (j <= 0) return 0.0;
  return h.covariates[static_cast<std::size_t>(j - 1)];
}

}  // namespace detail

inline constexpr int kDimY = 6;
inline constexpr int kDimX = 2;
inline constexpr int kDimA = 4;
inline constexpr int kDimT = 2;

inline int feature_dim(Process p) {
  switch (p) {
    case Process::Y: return kDimY;
    case Process::X: return kDimX;
    case Process::A: return kDimA;
    case Process::T: return kDimT;
  }
  return 0;
}

/// Regressors for process `p` at visit j (1-based) of a path or history:
///   Y: [1, t_j, x_j, a_{j-1}, a_{j-1} x_j, a_{j-1} t_j]
///   A: [1, y_j, x_j, a_{j-1}]   (regressors of a_j)
///   X, T: [x_{j-1}, a_{j-1}]    (X_j and the gap t_j - t_{j-1})
/// with a_0 = 0 and x_0 = 0. X and T may be requested for j = n + 1, the
/// next (unobserved) visit.
template <class H>
Eigen::VectorXd build_features_sim(Process p, const H& h, int j) {
  const int n = static_cast<int>(h.visit_times.size());
  if (j < 1) throw ModelError("build_features_sim: stage must be >= 1");
  Eigen::VectorXd f(feature_dim(p));
  switch (p) {
    case Process::Y: {
      if (j > n) throw ModelError("build_features_sim: Y needs visit j in history");
      const double t = h.visit_times[j - 1];
      const double x = h.covariates[j - 1];
      const double a = detail::treatment_at(h, j - 1);
      f << 1.0, t, x, a, a * x, a * t;
      break;
    }
    case Process::A: {
      if (j > n) throw ModelError("build_features_sim: A needs w_j in history");
      f << 1.0, detail::outcome_at(h, j), h.covariates[j - 1], static_cast<double>(detail::treatment_at(h, j - 1));
      break;
    }
    case Process::X:
    case Process::T: {
      if (j > n + 1) throw ModelError("build_features_sim: X/T needs visit j-1 in history");
      f << detail::covariate_at(h, j - 1), static_cast<double>(detail::treatment_at(h, j - 1));
      break;
    }
  }
  return f;
}

/// Dose-response state at visit j: whether any treatment preceded visit j,
/// the time since the most recent prior treatment, and the decayed dose
/// A_DR = Q exp(-T_last * eta).
struct DoseResponseState {
  int any_prior = 0;
  double time_since_last = 0.0;
  double decayed_dose = 0.0;
};

template <class H>
DoseResponseState dr_state(const H& h, int j, double eta) {
  if (j < 1) throw ModelError("dr_state: stage must be >= 1");
  if (!std::isfinite(eta)) throw ModelError("dr_state: non-finite decay rate");
  DoseResponseState s;
  const int limit = std::min<int>(j - 1, static_cast<int>(h.treatments.size()));
  double last = -1.0;
  for (int l = 1; l <= limit; ++l)
    if (h.treatments[l - 1] != 0) last = std::max(last, h.visit_times[l - 1]);
  if (j == 1 || last < 0.0) return s;
  s.any_prior = 1;
  s.time_since_last = h.visit_times[j - 1] - last;
  s.decayed_dose = std::exp(-s.time_since_last * eta);
  return s;
}

}  // namespace dtrjm
