#pragma once

// Mark families: the reward machinery only needs the conditional law of the
// next mark w = (x, y) given the history, a treatment and the outcome
// frailty u_W. The simulation-study model is one family; tests add others.

#include <Eigen/Dense>

#include <cmath>
#include <concepts>

#include "dtrjm/model/densities.hpp"
#include "dtrjm/model/features.hpp"
#include "dtrjm/model/link.hpp"
#include "dtrjm/model/types.hpp"
#include "dtrjm/rng.hpp"

namespace dtrjm {

struct Mark {
  double x = 0.0;
  double y = 0.0;
};

/// Requirements on a mark family `F`:
///   log_mark_density(h, j, u)      log f(w_j | h_{j-1}, t_j, a_{j-1}, u_W)
///   sample_mark(h, t, a, u, rng)   draw w at time t after treatment a
///   expected_outcome(h, t, a, u)   E[y at time t | h, a, u_W]
///   re_variance()                  prior variance of u_W
template <class F>
concept MarkFamily = requires(const F& f, const History& h, int j, double t, int a, double u, Stream& rng) {
  { f.log_mark_density(h, j, u) } -> std::convertible_to<double>;
  { f.sample_mark(h, t, a, u, rng) } -> std::same_as<Mark>;
  { f.expected_outcome(h, t, a, u) } -> std::convertible_to<double>;
  { f.re_variance() } -> std::convertible_to<double>;
};

/// Appends treatment `a` (assigned at the current last visit) and a new
/// visit at time t with mark w.
inline void extend_history(History& h, int a, double t, const Mark& w) {
  if (h.stage() > 0) h.treatments.push_back(a);
  h.visit_times.push_back(t);
  h.covariates.push_back(w.x);
  h.outcomes.push_back(w.y);
}

/// Probit outcome and Gaussian covariate of the simulation study.
class SimFamily {
 public:
  explicit SimFamily(const JointParams& p) : p_(p) {
    if (!(p.tau_X2 > 0.0)) throw ModelError("SimFamily: tau_X2 must be positive");
    if (!(p.sigma_W2() >= 0.0)) throw ModelError("SimFamily: negative frailty variance");
  }

  [[nodiscard]] const JointParams& params() const { return p_; }

  [[nodiscard]] double log_mark_density(const History& h, int j, double u) const {
    double out = log_density_outcome(h.outcomes[j - 1], build_features_sim(Process::Y, h, j), u, p_.phi_Y);
    if (j >= 2)
      out += log_density_covariate(h.covariates[j - 1], build_features_sim(Process::X, h, j), p_.phi_X, p_.tau_X2);
    return out;
  }

  [[nodiscard]] Mark sample_mark(const History& h, double t, int a, double u, Stream& rng) const {
    Mark w;
    w.x = rng.normal(covariate_mean(h, a), std::sqrt(p_.tau_X2));
    const auto& f = p_.phi_Y;
    const double lin = f[0] + f[1] * t + f[2] * w.x + a * (f[3] + f[4] * w.x + f[5] * t) + u;
    w.y = rng.bernoulli(probit_prob(lin));
    return w;
  }

  /// The covariate is integrated out in closed form:
  /// E[Phi(c + b x + u)] = Phi((c + b m + u) / sqrt(1 + b^2 tau^2)).
  [[nodiscard]] double expected_outcome(const History& h, double t, int a, double u) const {
    const auto& f = p_.phi_Y;
    const double c = f[0] + f[1] * t + a * (f[3] + f[5] * t);
    const double b = f[2] + a * f[4];
    const double m = covariate_mean(h, a);
    return normal_cdf((c + b * m + u) / std::sqrt(1.0 + b * b * p_.tau_X2));
  }

  [[nodiscard]] double re_variance() const { return p_.sigma_W2(); }

 private:
  [[nodiscard]] double covariate_mean(const History& h, int a) const {
    const double x_prev = h.stage() > 0 ? h.covariates.back() : 0.0;
    return p_.phi_X[0] * x_prev + p_.phi_X[1] * a;
  }

  JointParams p_;
};

static_assert(MarkFamily<SimFamily>);

}  // namespace dtrjm
