#pragma once

// Adaptive random-walk proposals: Haario-style empirical covariance with a
// Robbins-Monro scale, both frozen once burn-in ends.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

#include "dtrjm/rng.hpp"

namespace dtrjm {

class AdaptiveProposal {
 public:
  AdaptiveProposal() = default;

  AdaptiveProposal(int dim, double initial_sd, double target, int adapt_start = 200)
      : dim_(dim),
        target_(target),
        adapt_start_(adapt_start),
        base_(Eigen::MatrixXd::Identity(dim, dim) * initial_sd * initial_sd),
        mean_(Eigen::VectorXd::Zero(dim)),
        scatter_(Eigen::MatrixXd::Zero(dim, dim)) {
    base_chol_ = base_.llt().matrixL();
  }

  [[nodiscard]] int dim() const { return dim_; }
  [[nodiscard]] double target() const { return target_; }

  Eigen::VectorXd propose(const Eigen::VectorXd& x, Stream& rng) const {
    Eigen::VectorXd z(dim_);
    for (int i = 0; i < dim_; ++i) z[i] = rng.normal();
    return x + std::exp(log_scale_) * (base_chol_ * z);
  }

  /// Records one accept/reject decision and the resulting state.
  void record(bool accepted, const Eigen::VectorXd& state) {
    ++tries_;
    accepts_ += accepted;
    if (frozen_) {
      ++tries_frozen_;
      accepts_frozen_ += accepted;
      return;
    }
    ++n_;
    const double step = std::min(1.0, 5.0 * std::pow(static_cast<double>(n_), -0.6));
    log_scale_ += step * ((accepted ? 1.0 : 0.0) - target_);
    log_scale_ = std::clamp(log_scale_, -20.0, 20.0);

    const Eigen::VectorXd delta = state - mean_;
    mean_ += delta / static_cast<double>(n_);
    scatter_.noalias() += delta * (state - mean_).transpose();
    if (n_ >= adapt_start_ && n_ % 50 == 0) refresh_covariance();
  }

  void freeze() { frozen_ = true; }

  [[nodiscard]] double acceptance_rate() const { return tries_ ? static_cast<double>(accepts_) / tries_ : 0.0; }

  /// Acceptance rate after adaptation stopped (falls back to the overall rate).
  [[nodiscard]] double frozen_acceptance_rate() const {
    return tries_frozen_ ? static_cast<double>(accepts_frozen_) / tries_frozen_ : acceptance_rate();
  }

 private:
  void refresh_covariance() {
    Eigen::MatrixXd cov = scatter_ / static_cast<double>(n_ - 1);
    cov = 0.5 * (cov + cov.transpose());
    const double ridge = 1e-10 + 1e-8 * cov.diagonal().cwiseAbs().maxCoeff();
    Eigen::MatrixXd cand = (2.38 * 2.38 / dim_) * (cov + ridge * Eigen::MatrixXd::Identity(dim_, dim_));
    Eigen::LLT<Eigen::MatrixXd> llt(cand);
    if (llt.info() != Eigen::Success) return;
    if (!switched_) {
      // Re-centre the scale so the first switch does not jump.
      log_scale_ = 0.0;
      switched_ = true;
    }
    base_ = cand;
    base_chol_ = llt.matrixL();
  }

  int dim_ = 1;
  double target_ = 0.44;
  int adapt_start_ = 200;
  double log_scale_ = 0.0;
  Eigen::MatrixXd base_;
  Eigen::MatrixXd base_chol_;
  Eigen::VectorXd mean_;
  Eigen::MatrixXd scatter_;
  long n_ = 0;
  long tries_ = 0, accepts_ = 0, tries_frozen_ = 0, accepts_frozen_ = 0;
  bool frozen_ = false;
  bool switched_ = false;
};

}  // namespace dtrjm
