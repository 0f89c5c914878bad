#pragma once

// Metropolis-within-Gibbs sampler for the joint model.
//
// One sweep updates, in order: phi_Y; (phi_X, log tau_X2); phi_A;
// (phi_T, log lambda, log alpha); each individual's active frailties; and
// Sigma by its conjugate inverse-Wishart full conditional. Linear predictors
// and per-individual log-likelihood terms are cached per process so that a
// block update only touches the process it changes.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "dtrjm/inference/adaptive.hpp"
#include "dtrjm/inference/likelihood.hpp"
#include "dtrjm/inference/priors.hpp"
#include "dtrjm/model/densities.hpp"
#include "dtrjm/model/features.hpp"
#include "dtrjm/model/link.hpp"
#include "dtrjm/model/types.hpp"
#include "dtrjm/parallel.hpp"
#include "dtrjm/rng.hpp"

namespace dtrjm {

struct McmcError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct McmcConfig {
  int chains = 4;
  int iterations = 20000;
  int burn_in = 10000;
  int thin = 10;
  double target_multi = 0.234;
  double target_scalar = 0.44;
  double initial_proposal_sd = 0.1;
  int adapt_start = 200;
  std::uint64_t seed = 1;
  int threads = 1;

  void validate() const {
    if (chains < 1) throw ModelError("McmcConfig: chains must be >= 1");
    if (iterations < 1 || burn_in < 0 || burn_in >= iterations) throw ModelError("McmcConfig: need 0 <= burn_in < iterations");
    if (thin < 1) throw ModelError("McmcConfig: thin must be >= 1");
    if (!(target_multi > 0.0 && target_multi < 1.0) || !(target_scalar > 0.0 && target_scalar < 1.0))
      throw ModelError("McmcConfig: acceptance targets must lie in (0,1)");
    if (!(initial_proposal_sd > 0.0)) throw ModelError("McmcConfig: initial proposal sd must be positive");
    if (threads < 1) throw ModelError("McmcConfig: threads must be >= 1");
  }

  [[nodiscard]] int draws_per_chain() const { return (iterations - burn_in) / thin; }
};

struct PosteriorDraws {
  ModelSpec spec;
  std::vector<JointParams> params;
  std::vector<int> chain;
  std::vector<int> iteration;
  int chains = 0;
  /// Post-burn-in acceptance rate per chain and block.
  std::vector<std::map<std::string, double>> acceptance;

  [[nodiscard]] int size() const { return static_cast<int>(params.size()); }
};

enum class Block : std::uint64_t { outcome = 1, covariate, treatment, visits, effects, sigma };

inline const char* block_name(Block b) {
  switch (b) {
    case Block::outcome: return "phi_Y";
    case Block::covariate: return "phi_X";
    case Block::treatment: return "phi_A";
    case Block::visits: return "phi_T";
    case Block::effects: return "u";
    case Block::sigma: return "Sigma";
  }
  return "?";
}

/// A single chain. Exposed so that tests can drive and inspect it.
class GibbsChain {
 public:
  GibbsChain(const std::vector<PatientPath>& data, const ModelSpec& spec, const Priors& priors, const McmcConfig& cfg,
             int chain_index)
      : spec_(spec), priors_(priors), cfg_(cfg), chain_(chain_index), idx_(spec.active_effects()) {
    priors_.validate();
    n_ = static_cast<int>(data.size());
    for (const auto& p : data) p.validate();
    stack(data);
    for (auto b : {Block::outcome, Block::covariate, Block::treatment, Block::visits, Block::effects, Block::sigma})
      rng_[b] = Stream(cfg.seed, {static_cast<std::uint64_t>(Tag::chain_block), static_cast<std::uint64_t>(chain_),
                                  static_cast<std::uint64_t>(b)});
    initialise();
    const double tm = cfg.target_multi, ts = cfg.target_scalar, sd = cfg.initial_proposal_sd;
    prop_Y_ = AdaptiveProposal(kDimY, sd, tm, cfg.adapt_start);
    prop_X_ = AdaptiveProposal(kDimX + 1, sd, tm, cfg.adapt_start);
    prop_A_ = AdaptiveProposal(kDimA, sd, tm, cfg.adapt_start);
    prop_T_ = AdaptiveProposal(kDimT + 2, sd, tm, cfg.adapt_start);
    const double u_target = idx_.size() == 1 ? ts : tm;
    u_target_ = u_target;
    u_log_scale_.assign(static_cast<std::size_t>(n_), std::log(2.38 / std::sqrt(static_cast<double>(idx_.size()))));
    u_tries_ = u_accepts_ = 0;
  }

  /// One full sweep. `iteration` is 0-based; adaptation stops at burn_in.
  void step(int iteration) {
    if (iteration == cfg_.burn_in) freeze();
    iter_ = iteration;
    update_outcome();
    update_covariate();
    if (spec_.treatment) update_treatment();
    if (spec_.visits) update_visits();
    update_effects();
    update_sigma_block();
  }

  void freeze() {
    if (frozen_) return;
    frozen_ = true;
    prop_Y_.freeze();
    prop_X_.freeze();
    prop_A_.freeze();
    prop_T_.freeze();
    u_tries_ = u_accepts_ = 0;
  }

  [[nodiscard]] const JointParams& params() const { return p_; }
  [[nodiscard]] const std::vector<RandomEffects>& latent() const { return u_; }

  /// Log posterior assembled from the caches (for consistency checks).
  [[nodiscard]] double cached_log_posterior() const {
    double out = log_prior(p_, spec_, priors_) + llX_;
    for (int i = 0; i < n_; ++i) {
      out += llY_[i] + (spec_.treatment ? llA_[i] : 0.0) + (spec_.visits ? llT_[i] : 0.0);
      out += log_effects_density(u_[i], p_.Sigma, idx_);
    }
    return out;
  }

  [[nodiscard]] std::map<std::string, double> acceptance_rates() const {
    std::map<std::string, double> out;
    out[block_name(Block::outcome)] = prop_Y_.frozen_acceptance_rate();
    out[block_name(Block::covariate)] = prop_X_.frozen_acceptance_rate();
    if (spec_.treatment) out[block_name(Block::treatment)] = prop_A_.frozen_acceptance_rate();
    if (spec_.visits) out[block_name(Block::visits)] = prop_T_.frozen_acceptance_rate();
    if (n_ > 0) out[block_name(Block::effects)] = u_tries_ ? static_cast<double>(u_accepts_) / u_tries_ : 0.0;
    return out;
  }

  /// Replaces the state (parameters and frailties) and rebuilds the caches.
  void set_state(const JointParams& p, const std::vector<RandomEffects>& u) {
    if (static_cast<int>(u.size()) != n_) throw ModelError("GibbsChain: latent size mismatch");
    p_ = p;
    u_ = u;
    rebuild_caches();
  }

 private:
  struct Range {
    int begin = 0, end = 0;
  };

  void stack(const std::vector<PatientPath>& data) {
    int nY = 0, nX = 0, nA = 0, nT = 0;
    for (const auto& p : data) {
      nY += p.n_visits();
      nX += p.n_visits() - 1;
      nA += static_cast<int>(p.treatments.size());
      nT += p.n_visits();
    }
    HY_.resize(nY, kDimY);
    yv_.resize(nY);
    HX_.resize(nX, kDimX);
    xv_.resize(nX);
    HA_.resize(nA, kDimA);
    av_.resize(nA);
    HT_.resize(nT, kDimT);
    logg_.resize(nT);
    surv_.assign(static_cast<std::size_t>(nT), 0);
    rY_.resize(static_cast<std::size_t>(n_));
    rA_.resize(static_cast<std::size_t>(n_));
    rT_.resize(static_cast<std::size_t>(n_));
    int iy = 0, ix = 0, ia = 0, it = 0;
    for (int i = 0; i < n_; ++i) {
      const auto& p = data[static_cast<std::size_t>(i)];
      const int m = p.n_visits();
      rY_[i].begin = iy;
      for (int j = 1; j <= m; ++j, ++iy) {
        HY_.row(iy) = build_features_sim(Process::Y, p, j).transpose();
        yv_[iy] = p.outcomes[j - 1];
      }
      rY_[i].end = iy;
      for (int j = 2; j <= m; ++j, ++ix) {
        HX_.row(ix) = build_features_sim(Process::X, p, j).transpose();
        xv_[ix] = p.covariates[j - 1];
      }
      rA_[i].begin = ia;
      for (int j = 1; j <= static_cast<int>(p.treatments.size()); ++j, ++ia) {
        HA_.row(ia) = build_features_sim(Process::A, p, j).transpose();
        av_[ia] = p.treatments[j - 1];
      }
      rA_[i].end = ia;
      rT_[i].begin = it;
      for (int j = 2; j <= m; ++j, ++it) {
        HT_.row(it) = build_features_sim(Process::T, p, j).transpose();
        logg_[it] = std::log(p.visit_times[j - 1] - p.visit_times[j - 2]);
      }
      HT_(it, 0) = p.covariates[m - 1];
      HT_(it, 1) = final_treatment(p);
      logg_[it] = std::log(p.censor_time - p.visit_times[m - 1]);
      surv_[static_cast<std::size_t>(it)] = 1;
      ++it;
      rT_[i].end = it;
    }
  }

  void initialise() {
    Stream r(cfg_.seed, {static_cast<std::uint64_t>(Tag::init), static_cast<std::uint64_t>(chain_)});
    auto jitter = [&](Eigen::VectorXd& v) {
      for (Eigen::Index k = 0; k < v.size(); ++k) v[k] = r.normal(0.0, 0.25);
    };
    p_ = JointParams{};
    jitter(p_.phi_Y);
    jitter(p_.phi_X);
    p_.tau_X2 = std::exp(r.normal(0.0, 0.25));
    if (spec_.treatment) jitter(p_.phi_A);
    if (spec_.visits) {
      jitter(p_.phi_T);
      p_.lambda = std::exp(r.normal(0.0, 0.25));
      p_.alpha = std::exp(r.normal(0.0, 0.25));
    }
    p_.Sigma.setZero();
    for (int k : idx_) p_.Sigma(k, k) = 0.5;
    u_.assign(static_cast<std::size_t>(n_), RandomEffects{});
    rebuild_caches();
  }

  void rebuild_caches() {
    etaY_ = HY_ * p_.phi_Y;
    llY_ = outcome_terms(etaY_);
    llX_ = covariate_total(p_.phi_X, p_.tau_X2);
    if (spec_.treatment) {
      etaA_ = HA_ * p_.phi_A;
      llA_ = treatment_terms(etaA_);
    }
    if (spec_.visits) {
      etaT_ = HT_ * p_.phi_T;
      llT_ = visit_terms(etaT_, std::log(p_.lambda), p_.alpha);
    }
  }

  // --- per-process likelihood pieces -------------------------------------

  double outcome_individual(const Eigen::VectorXd& eta, int i, double uW) const {
    double s = 0.0;
    for (int r = rY_[i].begin; r < rY_[i].end; ++r) s += log_bernoulli_probit(yv_[r], eta[r] + uW);
    return s;
  }

  std::vector<double> outcome_terms(const Eigen::VectorXd& eta) const {
    std::vector<double> out(static_cast<std::size_t>(n_));
    for (int i = 0; i < n_; ++i) out[i] = outcome_individual(eta, i, u_[i].u_W);
    return out;
  }

  double covariate_total(const Eigen::VectorXd& phi, double tau2) const {
    if (xv_.size() == 0) return 0.0;
    const double ss = (xv_ - HX_ * phi).squaredNorm();
    return -static_cast<double>(xv_.size()) * (kLogSqrt2Pi + 0.5 * std::log(tau2)) - 0.5 * ss / tau2;
  }

  double treatment_individual(const Eigen::VectorXd& eta, int i, double uA) const {
    double s = 0.0;
    for (int r = rA_[i].begin; r < rA_[i].end; ++r) s += log_bernoulli_probit(av_[r], eta[r] + uA);
    return s;
  }

  std::vector<double> treatment_terms(const Eigen::VectorXd& eta) const {
    std::vector<double> out(static_cast<std::size_t>(n_));
    for (int i = 0; i < n_; ++i) out[i] = treatment_individual(eta, i, u_[i].u_A);
    return out;
  }

  double visit_individual(const Eigen::VectorXd& eta, int i, double uT, double log_lambda, double alpha) const {
    const double log_alpha = std::log(alpha);
    double s = 0.0;
    for (int r = rT_[i].begin; r < rT_[i].end; ++r) {
      const double log_b = log_lambda + uT + eta[r];
      const double cum = std::exp(log_b + alpha * logg_[r]);
      s -= cum;
      if (!surv_[static_cast<std::size_t>(r)]) s += log_b + log_alpha + (alpha - 1.0) * logg_[r];
    }
    return s;
  }

  std::vector<double> visit_terms(const Eigen::VectorXd& eta, double log_lambda, double alpha) const {
    std::vector<double> out(static_cast<std::size_t>(n_));
    for (int i = 0; i < n_; ++i) out[i] = visit_individual(eta, i, u_[i].u_T_log, log_lambda, alpha);
    return out;
  }

  static double sum(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }

  // --- block updates -----------------------------------------------------

  bool metropolis(double log_ratio, Block b) {
    if (std::isnan(log_ratio))
      throw McmcError("chain " + std::to_string(chain_) + ": non-finite log posterior in block " + block_name(b) +
                      " at iteration " + std::to_string(iter_));
    return std::log(rng_[b].uniform()) < log_ratio;
  }

  void update_outcome() {
    auto& rng = rng_[Block::outcome];
    const Eigen::VectorXd prop = prop_Y_.propose(p_.phi_Y, rng);
    const Eigen::VectorXd eta = HY_ * prop;
    std::vector<double> ll = outcome_terms(eta);
    const double lr = sum(ll) - sum(llY_) + priors_.log_coef(prop) - priors_.log_coef(p_.phi_Y);
    const bool acc = metropolis(lr, Block::outcome);
    if (acc) {
      p_.phi_Y = prop;
      etaY_ = eta;
      llY_ = std::move(ll);
    }
    prop_Y_.record(acc, p_.phi_Y);
  }

  void update_covariate() {
    auto& rng = rng_[Block::covariate];
    Eigen::VectorXd cur(kDimX + 1);
    cur << p_.phi_X, std::log(p_.tau_X2);
    const Eigen::VectorXd prop = prop_X_.propose(cur, rng);
    const Eigen::VectorXd phi = prop.head(kDimX);
    const double tau2 = std::exp(prop[kDimX]);
    const double ll = covariate_total(phi, tau2);
    // The random walk is on log tau2, hence the Jacobian tau2.
    const double lp_new = priors_.log_coef(phi) + priors_.log_inv_gamma(tau2) + prop[kDimX];
    const double lp_old = priors_.log_coef(p_.phi_X) + priors_.log_inv_gamma(p_.tau_X2) + cur[kDimX];
    const bool acc = metropolis(ll - llX_ + lp_new - lp_old, Block::covariate);
    if (acc) {
      p_.phi_X = phi;
      p_.tau_X2 = tau2;
      llX_ = ll;
      cur = prop;
    }
    prop_X_.record(acc, cur);
  }

  void update_treatment() {
    auto& rng = rng_[Block::treatment];
    const Eigen::VectorXd prop = prop_A_.propose(p_.phi_A, rng);
    const Eigen::VectorXd eta = HA_ * prop;
    std::vector<double> ll = treatment_terms(eta);
    const double lr = sum(ll) - sum(llA_) + priors_.log_coef(prop) - priors_.log_coef(p_.phi_A);
    const bool acc = metropolis(lr, Block::treatment);
    if (acc) {
      p_.phi_A = prop;
      etaA_ = eta;
      llA_ = std::move(ll);
    }
    prop_A_.record(acc, p_.phi_A);
  }

  void update_visits() {
    auto& rng = rng_[Block::visits];
    Eigen::VectorXd cur(kDimT + 2);
    cur << p_.phi_T, std::log(p_.lambda), std::log(p_.alpha);
    const Eigen::VectorXd prop = prop_T_.propose(cur, rng);
    const Eigen::VectorXd phi = prop.head(kDimT);
    const double alpha = std::exp(prop[kDimT + 1]);
    const Eigen::VectorXd eta = HT_ * phi;
    std::vector<double> ll = visit_terms(eta, prop[kDimT], alpha);
    auto lp = [&](const Eigen::VectorXd& v) {
      return priors_.log_coef(v.head(kDimT)) + log_normal_pdf(v[kDimT], 0.0, priors_.log_scale_var) +
             log_normal_pdf(v[kDimT + 1], 0.0, priors_.log_scale_var);
    };
    const double lr = sum(ll) - sum(llT_) + lp(prop) - lp(cur);
    const bool acc = metropolis(lr, Block::visits);
    if (acc) {
      p_.phi_T = phi;
      p_.lambda = std::exp(prop[kDimT]);
      p_.alpha = alpha;
      etaT_ = eta;
      llT_ = std::move(ll);
      cur = prop;
    }
    prop_T_.record(acc, cur);
  }

  void update_effects() {
    if (n_ == 0) return;
    auto& rng = rng_[Block::effects];
    const auto k = static_cast<Eigen::Index>(idx_.size());
    const Eigen::MatrixXd S = active_block(p_.Sigma, idx_);
    Eigen::LLT<Eigen::MatrixXd> llt(S);
    if (llt.info() != Eigen::Success) throw McmcError("chain " + std::to_string(chain_) + ": Sigma lost definiteness");
    const Eigen::MatrixXd L = llt.matrixL();
    const double log_lambda = spec_.visits ? std::log(p_.lambda) : 0.0;
    auto quad = [&](const Eigen::VectorXd& v) { return L.triangularView<Eigen::Lower>().solve(v).squaredNorm(); };
    Eigen::VectorXd z(k);
    for (int i = 0; i < n_; ++i) {
      const Eigen::VectorXd cur = active_part(u_[i], idx_);
      for (Eigen::Index d = 0; d < k; ++d) z[d] = rng.normal();
      const Eigen::VectorXd prop = cur + std::exp(u_log_scale_[i]) * (L * z);
      Eigen::Vector3d full = u_[i].as_vector();
      for (Eigen::Index d = 0; d < k; ++d) full[idx_[d]] = prop[d];
      const RandomEffects un = RandomEffects::from_vector(full);

      const double nY = outcome_individual(etaY_, i, un.u_W);
      const double nA = spec_.treatment ? treatment_individual(etaA_, i, un.u_A) : 0.0;
      const double nT = spec_.visits ? visit_individual(etaT_, i, un.u_T_log, log_lambda, p_.alpha) : 0.0;
      double lr = nY - llY_[i] - 0.5 * (quad(prop) - quad(cur));
      if (spec_.treatment) lr += nA - llA_[i];
      if (spec_.visits) lr += nT - llT_[i];
      const bool acc = metropolis(lr, Block::effects);
      if (acc) {
        u_[i] = un;
        llY_[i] = nY;
        if (spec_.treatment) llA_[i] = nA;
        if (spec_.visits) llT_[i] = nT;
      }
      ++u_tries_;
      u_accepts_ += acc;
      if (!frozen_) {
        const double step = std::min(1.0, 5.0 * std::pow(static_cast<double>(iter_ + 1), -0.6));
        u_log_scale_[i] = std::clamp(u_log_scale_[i] + step * ((acc ? 1.0 : 0.0) - u_target_), -10.0, 10.0);
      }
    }
  }

  void update_sigma_block() { p_.Sigma = update_sigma(u_, spec_, priors_, rng_[Block::sigma]); }

  ModelSpec spec_;
  Priors priors_;
  McmcConfig cfg_;
  int chain_ = 0;
  std::vector<int> idx_;
  int n_ = 0;
  int iter_ = 0;
  bool frozen_ = false;

  Eigen::MatrixXd HY_, HX_, HA_, HT_;
  Eigen::VectorXd yv_, xv_, av_, logg_;
  std::vector<char> surv_;
  std::vector<Range> rY_, rA_, rT_;

  JointParams p_;
  std::vector<RandomEffects> u_;
  Eigen::VectorXd etaY_, etaA_, etaT_;
  std::vector<double> llY_, llA_, llT_;
  double llX_ = 0.0;

  std::map<Block, Stream> rng_;
  AdaptiveProposal prop_Y_, prop_X_, prop_A_, prop_T_;
  std::vector<double> u_log_scale_;
  double u_target_ = 0.44;
  long u_tries_ = 0, u_accepts_ = 0;
};

namespace detail {

struct ChainOutput {
  std::vector<JointParams> params;
  std::vector<int> iteration;
  std::map<std::string, double> acceptance;
};

inline ChainOutput run_chain(const std::vector<PatientPath>& data, const ModelSpec& spec, const Priors& priors,
                             const McmcConfig& cfg, int c) {
  ChainOutput out;
  try {
    GibbsChain chain(data, spec, priors, cfg, c);
    out.params.reserve(static_cast<std::size_t>(cfg.draws_per_chain()));
    for (int it = 0; it < cfg.iterations; ++it) {
      chain.step(it);
      const int kept = it + 1 - cfg.burn_in;
      if (kept > 0 && kept % cfg.thin == 0) {
        out.params.push_back(chain.params());
        out.iteration.push_back(it + 1);
      }
    }
    out.acceptance = chain.acceptance_rates();
  } catch (const McmcError&) {
    throw;
  } catch (const std::exception& e) {
    throw McmcError("chain " + std::to_string(c) + ": " + e.what());
  }
  return out;
}

}  // namespace detail

/// Runs cfg.chains independent chains. Each chain's randomness comes from
/// streams keyed by (seed, chain, block), so results do not depend on the
/// thread count.
inline PosteriorDraws run_mcmc(const std::vector<PatientPath>& data, const ModelSpec& spec, const Priors& priors,
                               const McmcConfig& cfg) {
  cfg.validate();
  std::vector<detail::ChainOutput> outs(static_cast<std::size_t>(cfg.chains));
  parallel_for(cfg.chains, cfg.threads,
                       [&](int c) { outs[static_cast<std::size_t>(c)] = detail::run_chain(data, spec, priors, cfg, c); });
  PosteriorDraws d;
  d.spec = spec;
  d.chains = cfg.chains;
  for (int c = 0; c < cfg.chains; ++c) {
    auto& o = outs[static_cast<std::size_t>(c)];
    for (std::size_t k = 0; k < o.params.size(); ++k) {
      d.params.push_back(std::move(o.params[k]));
      d.chain.push_back(c);
      d.iteration.push_back(o.iteration[k]);
    }
    d.acceptance.push_back(std::move(o.acceptance));
  }
  return d;
}

}  // namespace dtrjm
