#pragma once

// Inverse-Wishart density and sampling.

#include <Eigen/Dense>

#include <cmath>

#include "dtrjm/model/types.hpp"
#include "dtrjm/rng.hpp"

namespace dtrjm {

/// log Gamma_p(a), the multivariate gamma function.
inline double log_multigamma(double a, int p) {
  double out = 0.25 * p * (p - 1) * std::log(M_PI);
  for (int j = 0; j < p; ++j) out += std::lgamma(a - 0.5 * j);
  return out;
}

/// log density of IW(Psi, nu) at S (p x p).
inline double log_inv_wishart_pdf(const Eigen::MatrixXd& S, const Eigen::MatrixXd& Psi, double nu) {
  const auto p = static_cast<int>(S.rows());
  Eigen::LLT<Eigen::MatrixXd> ls(S);
  if (ls.info() != Eigen::Success) throw ModelError("inverse-Wishart density: matrix not positive definite");
  Eigen::LLT<Eigen::MatrixXd> lp(Psi);
  const double logdet_S = 2.0 * ls.matrixLLT().diagonal().array().log().sum();
  const double logdet_P = 2.0 * lp.matrixLLT().diagonal().array().log().sum();
  const double tr = (Psi * ls.solve(Eigen::MatrixXd::Identity(p, p))).trace();
  return 0.5 * nu * logdet_P - 0.5 * nu * p * std::log(2.0) - log_multigamma(0.5 * nu, p) -
         0.5 * (nu + p + 1.0) * logdet_S - 0.5 * tr;
}

/// Draw from IW(Psi, nu) by inverting a Bartlett-decomposed Wishart draw.
inline Eigen::MatrixXd draw_inv_wishart(const Eigen::MatrixXd& Psi, double nu, Stream& rng) {
  const auto p = Psi.rows();
  if (!(nu > p - 1)) throw ModelError("inverse-Wishart: degrees of freedom too small");
  const Eigen::MatrixXd Psi_inv = Psi.llt().solve(Eigen::MatrixXd::Identity(p, p));
  const Eigen::MatrixXd L = Psi_inv.llt().matrixL();
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(p, p);
  for (Eigen::Index i = 0; i < p; ++i) {
    A(i, i) = std::sqrt(rng.chi_square(nu - static_cast<double>(i)));
    for (Eigen::Index j = 0; j < i; ++j) A(i, j) = rng.normal();
  }
  const Eigen::MatrixXd LA = L * A;
  const Eigen::MatrixXd W = LA * LA.transpose();
  Eigen::MatrixXd S = W.llt().solve(Eigen::MatrixXd::Identity(p, p));
  return 0.5 * (S + S.transpose());
}

}  // namespace dtrjm
