#pragma once

// Joint-model likelihood of observed paths and the joint log posterior.

#include <vector>

#include "dtrjm/inference/priors.hpp"
#include "dtrjm/model/densities.hpp"
#include "dtrjm/model/features.hpp"
#include "dtrjm/model/types.hpp"

namespace dtrjm {

/// Per-process log-likelihood contributions of one individual.
struct LikelihoodTerms {
  double outcome = 0.0;
  double covariate = 0.0;
  double treatment = 0.0;
  double visits = 0.0;

  [[nodiscard]] double total() const { return outcome + covariate + treatment + visits; }
};

/// Treatment assigned at the last visit, or 0 when it was not recorded.
inline int final_treatment(const PatientPath& p) {
  return p.treatments.size() == static_cast<std::size_t>(p.n_visits()) ? p.treatments.back() : 0;
}

/// Terms of one individual: outcomes at every visit, covariates from visit
/// 2 on (x_1 is fixed by design), every recorded treatment, the observed
/// gaps, and the survival of the unobserved next gap past the censoring time.
inline LikelihoodTerms individual_log_likelihood(const JointParams& params, const RandomEffects& u,
                                                 const PatientPath& path, const ModelSpec& spec) {
  LikelihoodTerms out;
  const int m = path.n_visits();
  for (int j = 1; j <= m; ++j) {
    out.outcome += log_density_outcome(path.outcomes[j - 1], build_features_sim(Process::Y, path, j), u.u_W,
                                       params.phi_Y);
    if (j >= 2)
      out.covariate += log_density_covariate(path.covariates[j - 1], build_features_sim(Process::X, path, j),
                                             params.phi_X, params.tau_X2);
  }
  if (spec.treatment) {
    for (int j = 1; j <= static_cast<int>(path.treatments.size()); ++j)
      out.treatment += log_density_treatment(path.treatments[j - 1], build_features_sim(Process::A, path, j), u.u_A,
                                             params.phi_A);
  }
  if (spec.visits) {
    for (int j = 2; j <= m; ++j)
      out.visits += log_density_visit_gap(path.visit_times[j - 1] - path.visit_times[j - 2],
                                          build_features_sim(Process::T, path, j), u.u_T_log, params.phi_T,
                                          params.lambda, params.alpha);
    Eigen::VectorXd f(2);
    f << path.covariates[m - 1], static_cast<double>(final_treatment(path));
    out.visits += log_survival_visit_gap(path.censor_time - path.visit_times[m - 1], f, u.u_T_log, params.phi_T,
                                         params.lambda, params.alpha);
  }
  return out;
}

/// Log prior plus, for every individual, its likelihood terms and the
/// density of its active frailties.
inline double joint_log_posterior(const JointParams& params, const std::vector<RandomEffects>& latent,
                                  const std::vector<PatientPath>& data, const ModelSpec& spec, const Priors& priors) {
  if (latent.size() != data.size()) throw ModelError("joint_log_posterior: one latent vector per individual required");
  const auto idx = spec.active_effects();
  double out = log_prior(params, spec, priors);
  for (std::size_t i = 0; i < data.size(); ++i) {
    out += individual_log_likelihood(params, latent[i], data[i], spec).total();
    out += log_effects_density(latent[i], params.Sigma, idx);
  }
  return out;
}

}  // namespace dtrjm
