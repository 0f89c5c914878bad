#pragma once

// Conditional log-densities of the four processes.

#include <Eigen/Dense>

#include <cmath>

#include "dtrjm/model/link.hpp"
#include "dtrjm/model/types.hpp"

namespace dtrjm {

using ConstVecRef = Eigen::Ref<const Eigen::VectorXd>;

namespace detail {
inline double dot_checked(const ConstVecRef& f, const ConstVecRef& coef, const char* who) {
  if (f.size() != coef.size()) throw ModelError(std::string(who) + ": dimension mismatch");
  return f.dot(coef);
}
}  // namespace detail

inline double log_density_outcome(double y, const ConstVecRef& features, double u_W, const ConstVecRef& phi_Y) {
  if (!(y >= 0.0 && y <= 1.0)) throw ModelError("log_density_outcome: outcome outside [0,1]");
  return log_bernoulli_probit(y, detail::dot_checked(features, phi_Y, "log_density_outcome") + u_W);
}

inline double log_density_covariate(double x, const ConstVecRef& features, const ConstVecRef& phi_X, double tau_X2) {
  if (!(tau_X2 > 0.0)) throw ModelError("log_density_covariate: tau_X2 must be positive");
  return log_normal_pdf(x, detail::dot_checked(features, phi_X, "log_density_covariate"), tau_X2);
}

inline double log_density_treatment(int a, const ConstVecRef& features, double u_A, const ConstVecRef& phi_A) {
  if (a != 0 && a != 1) throw ModelError("log_density_treatment: treatment not binary");
  return log_bernoulli_probit(a, detail::dot_checked(features, phi_A, "log_density_treatment") + u_A);
}

/// Cumulative-hazard multiplier b = lambda exp(u_T_log) exp(features' phi_T),
/// so that S(g) = exp(-b g^alpha).
inline double visit_hazard_multiplier(const ConstVecRef& features, double u_T_log, const ConstVecRef& phi_T,
                                      double lambda) {
  if (!(lambda > 0.0)) throw ModelError("visit gap: lambda must be positive");
  return lambda * std::exp(u_T_log + detail::dot_checked(features, phi_T, "visit gap"));
}

/// Weibull log-density log(b alpha g^(alpha-1)) - b g^alpha.
inline double log_weibull_density(double gap, double b, double alpha) {
  return std::log(b) + std::log(alpha) + (alpha - 1.0) * std::log(gap) - b * std::pow(gap, alpha);
}

inline double log_weibull_survival(double gap, double b, double alpha) { return -b * std::pow(gap, alpha); }

inline double log_density_visit_gap(double gap, const ConstVecRef& features, double u_T_log, const ConstVecRef& phi_T,
                                    double lambda, double alpha) {
  if (!(gap > 0.0)) throw ModelError("log_density_visit_gap: gap must be positive");
  if (!(alpha > 0.0)) throw ModelError("log_density_visit_gap: alpha must be positive");
  return log_weibull_density(gap, visit_hazard_multiplier(features, u_T_log, phi_T, lambda), alpha);
}

inline double log_survival_visit_gap(double gap, const ConstVecRef& features, double u_T_log,
                                     const ConstVecRef& phi_T, double lambda, double alpha) {
  if (!(gap >= 0.0)) throw ModelError("log_survival_visit_gap: gap must be nonnegative");
  if (!(alpha > 0.0)) throw ModelError("log_survival_visit_gap: alpha must be positive");
  if (gap == 0.0) return 0.0;
  return log_weibull_survival(gap, visit_hazard_multiplier(features, u_T_log, phi_T, lambda), alpha);
}

}  // namespace dtrjm
