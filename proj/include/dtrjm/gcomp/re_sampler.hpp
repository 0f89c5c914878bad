#pragma once

// Sampling the outcome frailty given an observed history.

#include <Eigen/Dense>

#include <cmath>
#include <vector>

#include "dtrjm/gcomp/family.hpp"
#include "dtrjm/model/link.hpp"
#include "dtrjm/rng.hpp"

namespace dtrjm {

template <MarkFamily F>
double history_log_likelihood(const F& fam, const History& h, double u, int first = 1) {
  double s = 0.0;
  for (int j = first; j <= h.stage(); ++j) s += fam.log_mark_density(h, j, u);
  return s;
}

/// log of the ratio of conditional densities of u' and u given the
/// history. The normalising constant cancels.
template <MarkFamily F>
double re_posterior_log_ratio(double u_prime, double u_curr, const History& h, const F& fam) {
  const double s2 = fam.re_variance();
  double out = history_log_likelihood(fam, h, u_prime) - history_log_likelihood(fam, h, u_curr);
  if (s2 > 0.0) out += -0.5 * (u_prime * u_prime - u_curr * u_curr) / s2;
  return out;
}

inline double re_posterior_log_ratio(double u_prime, double u_curr, const History& h, const JointParams& p) {
  return re_posterior_log_ratio(u_prime, u_curr, h, SimFamily(p));
}

struct ReSamplerStats {
  long proposals = 0;
  long accepted = 0;
};

/// Independence Metropolis with the frailty prior as proposal. Since the
/// proposal is the prior, the prior terms cancel and acceptance depends on
/// the likelihood terms only. Returns R states after `warmup` steps.
template <MarkFamily F>
std::vector<double> sample_re_conditional(const History& h, const F& fam, int R, Stream& rng, int warmup = 100,
                                          ReSamplerStats* stats = nullptr) {
  if (R < 1) throw ModelError("sample_re_conditional: R must be >= 1");
  if (warmup < 0) throw ModelError("sample_re_conditional: negative warmup");
  const double sd = std::sqrt(fam.re_variance());
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(R));
  if (sd == 0.0) {
    out.assign(static_cast<std::size_t>(R), 0.0);
    return out;
  }
  double u = rng.normal(0.0, sd);
  double ll = history_log_likelihood(fam, h, u);
  for (int it = 0; it < warmup + R; ++it) {
    const double prop = rng.normal(0.0, sd);
    const double ll_prop = history_log_likelihood(fam, h, prop);
    const bool acc = std::log(rng.uniform()) <= std::min(ll_prop - ll, 0.0);
    if (acc) {
      u = prop;
      ll = ll_prop;
    }
    if (stats) {
      ++stats->proposals;
      stats->accepted += acc;
    }
    if (it >= warmup) out.push_back(u);
  }
  return out;
}

/// Gauss-Hermite rule for integrals of f(x) exp(-x^2), from the
/// eigen-decomposition of the Jacobi matrix.
struct GaussHermite {
  std::vector<double> nodes;
  std::vector<double> weights;

  explicit GaussHermite(int n) {
    if (n < 1) throw ModelError("GaussHermite: need at least one node");
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
    for (int i = 1; i < n; ++i) J(i, i - 1) = J(i - 1, i) = std::sqrt(i / 2.0);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
    for (int i = 0; i < n; ++i) {
      nodes.push_back(es.eigenvalues()[i]);
      const double v = es.eigenvectors()(0, i);
      weights.push_back(std::sqrt(M_PI) * v * v);
    }
  }
};

/// Discretised conditional law of u_W given a base history, on the
/// Gauss-Hermite nodes of its N(0, sigma^2) prior. Extra visits appended to
/// the base history can be folded in without rescoring the base.
template <MarkFamily F>
class FrailtyPosterior {
 public:
  FrailtyPosterior(const F& fam, const History& base, const GaussHermite& rule) : fam_(&fam) {
    const double sd = std::sqrt(fam.re_variance());
    if (sd == 0.0) {
      u_ = {0.0};
      logw_ = {0.0};
    } else {
      for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
        u_.push_back(std::sqrt(2.0) * sd * rule.nodes[i]);
        logw_.push_back(std::log(rule.weights[i]) + history_log_likelihood(fam, base, u_.back()));
      }
    }
    base_stage_ = base.stage();
  }

  [[nodiscard]] const std::vector<double>& nodes() const { return u_; }

  /// Normalised weights given `h`, which must extend the base history.
  [[nodiscard]] std::vector<double> weights(const History& h) const {
    std::vector<double> lw = logw_;
    for (std::size_t i = 0; i < u_.size(); ++i)
      for (int j = base_stage_ + 1; j <= h.stage(); ++j) lw[i] += fam_->log_mark_density(h, j, u_[i]);
    double mx = lw[0];
    for (double v : lw) mx = std::max(mx, v);
    double tot = 0.0;
    for (double& v : lw) {
      v = std::exp(v - mx);
      tot += v;
    }
    for (double& v : lw) v /= tot;
    return lw;
  }

 private:
  const F* fam_;
  std::vector<double> u_;
  std::vector<double> logw_;
  int base_stage_ = 0;
};

}  // namespace dtrjm
