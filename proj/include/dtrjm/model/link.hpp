#pragma once

#include <cmath>
#include <numbers>

#include "dtrjm/model/types.hpp"

namespace dtrjm {

/// Probabilities are clamped to [kProbFloor, 1 - kProbFloor] so that
/// Bernoulli log-densities stay finite.
inline constexpr double kProbFloor = 1e-12;

inline constexpr double kLogSqrt2Pi = 0.91893853320467274178;

/// Standard normal CDF without clamping.
inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

/// Probit inverse link: standard normal CDF clamped away from 0 and 1.
inline double probit_prob(double lin) {
  if (!std::isfinite(lin)) throw ModelError("probit_prob: non-finite linear predictor");
  const double p = normal_cdf(lin);
  if (p < kProbFloor) return kProbFloor;
  if (p > 1.0 - kProbFloor) return 1.0 - kProbFloor;
  return p;
}

/// y log p + (1 - y) log(1 - p) with p = probit_prob(lin). y may be a
/// fractional (averaged) outcome.
inline double log_bernoulli_probit(double y, double lin) {
  const double p = probit_prob(lin);
  double out = 0.0;
  if (y != 0.0) out += y * std::log(p);
  if (y != 1.0) out += (1.0 - y) * std::log1p(-p);
  return out;
}

inline double log_normal_pdf(double x, double mean, double var) {
  const double d = x - mean;
  return -kLogSqrt2Pi - 0.5 * std::log(var) - 0.5 * d * d / var;
}

}  // namespace dtrjm
