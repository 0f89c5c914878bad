#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <vector>

#include "dtrjm/inference/wishart.hpp"
#include "dtrjm/model/link.hpp"
#include "dtrjm/model/types.hpp"

namespace dtrjm {

/// Coefficients N(0, coef_var); tau_X2 ~ InvGamma(ig_shape, ig_scale);
/// log lambda, log alpha ~ N(0, log_scale_var); the active block of Sigma
/// ~ InverseWishart(I, p + iw_extra_dof).
struct Priors {
  double coef_var = 25.0;
  double ig_shape = 0.1;
  double ig_scale = 0.1;
  double log_scale_var = 25.0;
  double iw_extra_dof = 0.0;

  void validate() const {
    if (!(coef_var > 0.0) || !(ig_shape > 0.0) || !(ig_scale > 0.0) || !(log_scale_var > 0.0) ||
        !(iw_extra_dof >= 0.0))
      throw ModelError("Priors: hyperparameters must be positive");
  }

  [[nodiscard]] double iw_dof(int p) const { return p + iw_extra_dof; }

  [[nodiscard]] double log_coef(const Eigen::VectorXd& v) const {
    double out = 0.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) out += log_normal_pdf(v[i], 0.0, coef_var);
    return out;
  }

  [[nodiscard]] double log_inv_gamma(double x) const {
    return ig_shape * std::log(ig_scale) - std::lgamma(ig_shape) - (ig_shape + 1.0) * std::log(x) - ig_scale / x;
  }

  /// Prior on the log of a positive scale, as a density of the log.
  [[nodiscard]] double log_log_scale(double x) const { return log_normal_pdf(std::log(x), 0.0, log_scale_var); }
};

inline Eigen::MatrixXd active_block(const Eigen::Matrix3d& S, const std::vector<int>& idx) {
  const auto p = static_cast<Eigen::Index>(idx.size());
  Eigen::MatrixXd out(p, p);
  for (Eigen::Index i = 0; i < p; ++i)
    for (Eigen::Index j = 0; j < p; ++j) out(i, j) = S(idx[i], idx[j]);
  return out;
}

inline Eigen::VectorXd active_part(const RandomEffects& u, const std::vector<int>& idx) {
  const Eigen::Vector3d v = u.as_vector();
  Eigen::VectorXd out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[idx[i]];
  return out;
}

/// Log prior density of the parameters the spec uses. lambda and alpha are
/// scored on the log scale; tau_X2 on its natural scale.
inline double log_prior(const JointParams& p, const ModelSpec& spec, const Priors& pr) {
  double out = pr.log_coef(p.phi_Y) + pr.log_coef(p.phi_X) + pr.log_inv_gamma(p.tau_X2);
  if (spec.treatment) out += pr.log_coef(p.phi_A);
  if (spec.visits) out += pr.log_coef(p.phi_T) + pr.log_log_scale(p.lambda) + pr.log_log_scale(p.alpha);
  const auto idx = spec.active_effects();
  const auto k = static_cast<int>(idx.size());
  out += log_inv_wishart_pdf(active_block(p.Sigma, idx), Eigen::MatrixXd::Identity(k, k), pr.iw_dof(k));
  return out;
}

/// Zero-mean multivariate normal log density of the active frailties.
inline double log_effects_density(const RandomEffects& u, const Eigen::Matrix3d& Sigma, const std::vector<int>& idx) {
  const Eigen::MatrixXd S = active_block(Sigma, idx);
  Eigen::LLT<Eigen::MatrixXd> llt(S);
  if (llt.info() != Eigen::Success) throw ModelError("random-effect density: Sigma not positive definite");
  const Eigen::VectorXd v = active_part(u, idx);
  const Eigen::VectorXd z = llt.matrixL().solve(v);
  const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  return -static_cast<double>(idx.size()) * kLogSqrt2Pi - 0.5 * logdet - 0.5 * z.squaredNorm();
}

/// Conjugate draw Sigma_active | u ~ IW(I + sum u u', dof + n), embedded in
/// a 3x3 matrix with zeros outside the active coordinates.
inline Eigen::Matrix3d update_sigma(const std::vector<RandomEffects>& u, const ModelSpec& spec, const Priors& pr,
                                    Stream& rng) {
  const auto idx = spec.active_effects();
  const auto k = static_cast<Eigen::Index>(idx.size());
  Eigen::MatrixXd Psi = Eigen::MatrixXd::Identity(k, k);
  for (const auto& ui : u) {
    const Eigen::VectorXd v = active_part(ui, idx);
    Psi.noalias() += v * v.transpose();
  }
  const Eigen::MatrixXd draw = draw_inv_wishart(Psi, pr.iw_dof(static_cast<int>(k)) + static_cast<double>(u.size()), rng);
  Eigen::Matrix3d S = Eigen::Matrix3d::Zero();
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = 0; j < k; ++j) S(idx[i], idx[j]) = draw(i, j);
  return S;
}

}  // namespace dtrjm
