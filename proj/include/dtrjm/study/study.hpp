#pragma once

// End-to-end simulation study: replicate training sets, fit each model
// specification, evaluate profile and test-set rewards, aggregate metrics.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "dtrjm/gcomp/posterior.hpp"
#include "dtrjm/inference/diagnostics.hpp"
#include "dtrjm/inference/flatten.hpp"
#include "dtrjm/inference/mcmc.hpp"
#include "dtrjm/metrics/metrics.hpp"
#include "dtrjm/parallel.hpp"
#include "dtrjm/simulate/simulate.hpp"

namespace dtrjm {

inline std::vector<ModelSpec> all_specs() {
  return {ModelSpec::parse("YAT"), ModelSpec::parse("YA"), ModelSpec::parse("YT"), ModelSpec::parse("Y")};
}

/// Stable per-spec key, independent of which specs a study runs.
inline std::uint64_t spec_code(const ModelSpec& s) { return (s.treatment ? 1u : 0u) + (s.visits ? 2u : 0u); }

struct StudyConfig {
  int n_train = 300;
  int n_test = 100;
  int replications = 20;
  std::vector<ModelSpec> specs = all_specs();
  /// Chain seeds are derived from `seed`; mcmc.seed is ignored.
  McmcConfig mcmc;
  Priors priors;
  Scenario scenario = Scenario::full_correlation;
  std::uint64_t seed = 1;
  JointParams params = JointParams::simulation_truth();
  CensorWindow censor;
  std::vector<double> future_times = {2.0, 3.0};
  std::vector<double> gamma = {1.0, 1.0};
  std::vector<int> profiles = {1, 2};
  /// Rollouts per posterior draw for the profile rewards.
  int rollouts = 2000;
  /// Posterior draws used for rewards (evenly thinned).
  int max_draws = 100;
  int truth_rollouts = 200000;
  int test_rollouts = 200;
  int test_draws = 20;
  int test_truth_rollouts = 20000;
  RewardOptions reward;
  /// Run-time only; never serialised.
  int threads = 1;

  void validate() const {
    if (n_train < 1 || n_test < 0 || replications < 1) throw ModelError("StudyConfig: sizes must be positive");
    if (specs.empty()) throw ModelError("StudyConfig: no model specifications");
    for (std::size_t i = 0; i < specs.size(); ++i)
      for (std::size_t k = i + 1; k < specs.size(); ++k)
        if (specs[i] == specs[k]) throw ModelError("StudyConfig: duplicate model specification");
    if (rollouts < 1 || max_draws < 0 || truth_rollouts < 1 || test_rollouts < 1 || test_draws < 0 ||
        test_truth_rollouts < 1)
      throw ModelError("StudyConfig: rollout and draw counts must be positive");
    if (profiles.empty()) throw ModelError("StudyConfig: no patient profiles");
    for (int p : profiles) patient_profile(p);
    if (threads < 1) throw ModelError("StudyConfig: threads must be >= 1");
    mcmc.validate();
    priors.validate();
    reward.validate();
    truth().validate();
    const Regime r = optimal_regime();
    r.validate(patient_profile(profiles.front()));
    if (r.future_times.front() <= 1.0) throw ModelError("StudyConfig: future times must follow the first visit at 1");
  }

  [[nodiscard]] JointParams truth() const {
    JointParams p = params;
    p.Sigma = scenario_sigma(params.Sigma, scenario);
    return p;
  }

  [[nodiscard]] Regime optimal_regime() const { return Regime::optimal(future_times, gamma); }
  [[nodiscard]] Regime never_treated() const {
    return Regime::fixed(std::vector<int>(future_times.size(), 0), future_times, gamma);
  }
};

struct ParameterSummary {
  std::string name;
  double truth = 0.0;
  double mean = 0.0;
  double sd = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double ess = 0.0;
  std::optional<double> rhat;

  [[nodiscard]] bool covered() const { return lower <= truth && truth <= upper; }
};

struct ProfileEstimate {
  int profile = 0;
  PosteriorReward optimal;
  PosteriorReward never;
};

struct TestSetEstimate {
  std::vector<double> value;
  std::vector<double> sd;
  std::vector<int> first_action;
};

struct SpecFit {
  ModelSpec spec;
  bool ok = false;
  std::string error;
  PosteriorDraws draws;
  std::vector<ParameterSummary> parameters;
  std::vector<ProfileEstimate> profiles;
  TestSetEstimate test;
};

struct Replication {
  int index = 0;
  Dataset data;
  std::vector<SpecFit> fits;
};

struct ProfileTruth {
  int profile = 0;
  double optimal = 0.0;
  int first_action = 0;
  double never = 0.0;
  /// First action pinned to 1 and to 0, later actions optimal.
  double treated = 0.0;
  double untreated = 0.0;
};

struct TestTruth {
  std::vector<History> histories;
  std::vector<double> optimal;
  std::vector<int> first_action;
  std::vector<double> benefit;
};

/// One row of the metric table. Bias, MC error (sd across replications /
/// sqrt(S)), SE MC (sd across replications) and Avg SE (mean posterior sd).
/// For the test set, bias is the mean absolute per-individual bias.
struct SummaryRow {
  std::string spec;
  std::string profile;
  std::string regime;
  int replications = 0;
  double truth = 0.0;
  double mean_estimate = 0.0;
  double bias = 0.0;
  double mc_error = 0.0;
  double se_mc = 0.0;
  double avg_se = 0.0;
  std::optional<double> agreement_rate;
  std::optional<VarianceComponents> components;
};

struct StudyReport {
  StudyConfig config;
  std::vector<ProfileTruth> truth;
  TestTruth test_truth;
  std::vector<Replication> replications;
  std::vector<SummaryRow> summary;
  std::vector<std::string> failures;

  [[nodiscard]] const SummaryRow* row(const std::string& spec, const std::string& profile,
                                      const std::string& regime) const {
    for (const auto& r : summary)
      if (r.spec == spec && r.profile == profile && r.regime == regime) return &r;
    return nullptr;
  }
};

inline std::string profile_label(int p) { return "patient" + std::to_string(p); }

namespace detail {

inline double quantile_sorted(const std::vector<double>& v, double q) {
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline std::vector<ParameterSummary> summarize_posterior(const PosteriorDraws& d, const JointParams& truth) {
  const auto diag = diagnostics(d);
  const auto t = flatten(truth, d.spec);
  std::vector<std::vector<double>> cols(diag.size());
  for (const auto& p : d.params) {
    const auto v = flatten(p, d.spec);
    for (std::size_t k = 0; k < v.size(); ++k) cols[k].push_back(v[k]);
  }
  std::vector<ParameterSummary> out;
  for (std::size_t k = 0; k < diag.size(); ++k) {
    auto& c = cols[k];
    std::sort(c.begin(), c.end());
    ParameterSummary s;
    s.name = diag[k].name;
    s.truth = t[k];
    s.mean = diag[k].mean;
    s.sd = diag[k].sd;
    s.ess = diag[k].ess;
    s.rhat = diag[k].rhat;
    s.lower = quantile_sorted(c, 0.025);
    s.upper = quantile_sorted(c, 0.975);
    out.push_back(std::move(s));
  }
  return out;
}

inline Stream study_stream(const StudyConfig& c, std::initializer_list<std::uint64_t> tags) {
  return Stream(c.seed, {static_cast<std::uint64_t>(Tag::replication)}).child(tags);
}

inline double sd_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  double m = 0.0;
  for (double x : v) m += x / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace detail

inline std::uint64_t replication_seed(const StudyConfig& c, int s) {
  return mix_key(c.seed, {static_cast<std::uint64_t>(Tag::replication), static_cast<std::uint64_t>(s)});
}

inline std::uint64_t chain_seed(const StudyConfig& c, int s, const ModelSpec& spec) {
  return mix_key(c.seed, {static_cast<std::uint64_t>(Tag::chain), static_cast<std::uint64_t>(s), spec_code(spec)});
}

/// Rewards at the data-generating parameters.
inline std::vector<ProfileTruth> profile_truth(const StudyConfig& c) {
  const SimFamily fam(c.truth());
  std::vector<ProfileTruth> out;
  for (int p : c.profiles) {
    const Stream rng(c.seed, {static_cast<std::uint64_t>(Tag::truth), static_cast<std::uint64_t>(p)});
    const History h = patient_profile(p);
    const auto [plan, e] = reward_optimal(h, c.optimal_regime(), fam, c.truth_rollouts, rng, c.reward);
    ProfileTruth t;
    t.profile = p;
    t.optimal = e.value;
    t.first_action = plan.first_action;
    t.untreated = e.arm_values.front();
    t.treated = e.arm_values.back();
    t.never = reward_fixed(h, c.never_treated(), fam, c.truth_rollouts, rng.child({1}), c.reward).value;
    out.push_back(t);
  }
  return out;
}

inline TestTruth test_truth(const StudyConfig& c) {
  const JointParams truth = c.truth();
  const SimFamily fam(truth);
  TestTruth t;
  t.histories.resize(static_cast<std::size_t>(c.n_test));
  t.optimal.resize(t.histories.size());
  t.first_action.resize(t.histories.size());
  t.benefit.resize(t.histories.size());
  parallel_for(c.n_test, c.threads, [&](int i) {
    const auto k = static_cast<std::size_t>(i);
    t.histories[k] = generate_test_history(truth, test_history_stream(c.seed, i)).history;
    const Stream rng(c.seed, {static_cast<std::uint64_t>(Tag::truth), 1000, k});
    const auto [plan, e] = reward_optimal(t.histories[k], c.optimal_regime(), fam, c.test_truth_rollouts, rng, c.reward);
    t.optimal[k] = e.value;
    t.first_action[k] = plan.first_action;
    t.benefit[k] = e.arm_values.back() - e.arm_values.front();
  });
  return t;
}

/// Fit one spec on one replication and evaluate its rewards. Failures are
/// recorded in the result rather than thrown.
inline SpecFit fit_and_evaluate(const StudyConfig& c, const Replication& rep, const ModelSpec& spec,
                                const TestTruth& tt) {
  SpecFit fit;
  fit.spec = spec;
  try {
    McmcConfig mc = c.mcmc;
    mc.seed = chain_seed(c, rep.index, spec);
    mc.threads = 1;
    fit.draws = run_mcmc(rep.data.paths, spec, c.priors, mc);
    fit.parameters = detail::summarize_posterior(fit.draws, c.truth());
    const auto s = static_cast<std::uint64_t>(rep.index);
    for (int p : c.profiles) {
      ProfileEstimate pe;
      pe.profile = p;
      const History h = patient_profile(p);
      const auto base = detail::study_stream(c, {s, spec_code(spec), static_cast<std::uint64_t>(p)});
      pe.optimal = posterior_reward(h, c.optimal_regime(), fit.draws.params, c.rollouts, base.child({0}), c.reward,
                                    c.max_draws);
      pe.never = posterior_reward(h, c.never_treated(), fit.draws.params, c.rollouts, base.child({1}), c.reward,
                                  c.max_draws);
      fit.profiles.push_back(std::move(pe));
    }
    for (std::size_t i = 0; i < tt.histories.size(); ++i) {
      const auto rng = detail::study_stream(c, {s, spec_code(spec), 1000, i});
      const auto pr = posterior_reward(tt.histories[i], c.optimal_regime(), fit.draws.params, c.test_rollouts, rng,
                                       c.reward, c.test_draws);
      fit.test.value.push_back(pr.mean);
      fit.test.sd.push_back(pr.sd);
      fit.test.first_action.push_back(pr.recommended_first_action);
    }
    fit.ok = true;
  } catch (const std::exception& e) {
    fit.ok = false;
    fit.error = e.what();
    fit.profiles.clear();
    fit.test = {};
  }
  return fit;
}

namespace detail {

inline SummaryRow summary_row(const std::string& spec, const std::string& profile, const std::string& regime,
                              double truth, const std::vector<const PosteriorReward*>& est,
                              std::optional<int> true_action) {
  SummaryRow row;
  row.spec = spec;
  row.profile = profile;
  row.regime = regime;
  row.replications = static_cast<int>(est.size());
  row.truth = truth;
  if (est.empty()) {
    row.mean_estimate = row.bias = std::numeric_limits<double>::quiet_NaN();
    return row;
  }
  std::vector<double> means;
  std::vector<int> rec;
  double avg_se = 0.0;
  for (const auto* e : est) {
    means.push_back(e->mean);
    rec.push_back(e->recommended_first_action);
    avg_se += e->sd / static_cast<double>(est.size());
  }
  const auto b = bias_and_ar(means, truth, rec, true_action);
  row.mean_estimate = b.mean_estimate;
  row.bias = b.bias;
  row.se_mc = sd_of(means);
  row.mc_error = row.se_mc / std::sqrt(static_cast<double>(means.size()));
  row.avg_se = avg_se;
  row.agreement_rate = b.agreement_rate;
  std::vector<PosteriorReward> copies;
  for (const auto* e : est) copies.push_back(*e);
  try {
    row.components = mc_error(nested_summary(copies));
  } catch (const ModelError&) {
    row.components.reset();
  }
  return row;
}

}  // namespace detail

/// Aggregates successful fits into the metric table.
inline std::vector<SummaryRow> summarize_study(const StudyConfig& c, const std::vector<ProfileTruth>& truth,
                                               const TestTruth& tt, const std::vector<Replication>& reps) {
  std::vector<SummaryRow> rows;
  for (const auto& spec : c.specs) {
    std::vector<const SpecFit*> fits;
    for (const auto& r : reps)
      for (const auto& f : r.fits)
        if (f.spec == spec && f.ok) fits.push_back(&f);
    for (std::size_t k = 0; k < c.profiles.size(); ++k) {
      std::vector<const PosteriorReward*> opt, never;
      for (const auto* f : fits) {
        opt.push_back(&f->profiles[k].optimal);
        never.push_back(&f->profiles[k].never);
      }
      const auto label = profile_label(c.profiles[k]);
      rows.push_back(detail::summary_row(spec.name(), label, "optimal", truth[k].optimal, opt, truth[k].first_action));
      rows.push_back(detail::summary_row(spec.name(), label, "never_treated", truth[k].never, never, std::nullopt));
    }
    if (!tt.histories.empty()) {
      SummaryRow row;
      row.spec = spec.name();
      row.profile = "test";
      row.regime = "optimal";
      row.replications = static_cast<int>(fits.size());
      const auto n = static_cast<double>(tt.histories.size());
      double abs_bias = 0.0, ar = 0.0, se_mc = 0.0, avg_se = 0.0, est = 0.0, tru = 0.0;
      for (std::size_t i = 0; i < tt.histories.size(); ++i) {
        std::vector<double> v;
        double hits = 0.0;
        for (const auto* f : fits) {
          v.push_back(f->test.value[i]);
          hits += f->test.first_action[i] == tt.first_action[i];
          avg_se += f->test.sd[i] / (n * static_cast<double>(fits.size()));
        }
        if (v.empty()) continue;
        double m = 0.0;
        for (double x : v) m += x / static_cast<double>(v.size());
        abs_bias += std::abs(m - tt.optimal[i]) / n;
        ar += hits / static_cast<double>(v.size()) / n;
        se_mc += detail::sd_of(v) / n;
        est += m / n;
        tru += tt.optimal[i] / n;
      }
      row.truth = tru;
      row.mean_estimate = est;
      row.bias = abs_bias;
      row.se_mc = se_mc;
      row.mc_error = fits.empty() ? 0.0 : se_mc / std::sqrt(static_cast<double>(fits.size()));
      row.avg_se = avg_se;
      if (!fits.empty()) row.agreement_rate = ar;
      rows.push_back(row);
    }
  }
  return rows;
}

using StudyLog = std::function<void(const std::string&)>;

inline StudyReport run_study(const StudyConfig& c, const StudyLog& log = {}) {
  c.validate();
  std::mutex log_mutex;
  const auto say = [&](const std::string& m) {
    const std::lock_guard<std::mutex> lock(log_mutex);
    if (log) log(m);
  };
  StudyReport report;
  report.config = c;
  say("evaluating rewards at the data-generating parameters");
  report.truth = profile_truth(c);
  report.test_truth = test_truth(c);

  report.replications.resize(static_cast<std::size_t>(c.replications));
  for (int s = 0; s < c.replications; ++s) {
    auto& r = report.replications[static_cast<std::size_t>(s)];
    r.index = s;
    r.data = generate_dataset(c.n_train, c.truth(), replication_seed(c, s), c.censor);
    r.fits.resize(c.specs.size());
  }
  const int tasks = c.replications * static_cast<int>(c.specs.size());
  parallel_for(tasks, c.threads, [&](int t) {
    const auto s = static_cast<std::size_t>(t) / c.specs.size();
    const auto k = static_cast<std::size_t>(t) % c.specs.size();
    auto& rep = report.replications[s];
    rep.fits[k] = fit_and_evaluate(c, rep, c.specs[k], report.test_truth);
    say("replication " + std::to_string(s) + " spec " + c.specs[k].name() + (rep.fits[k].ok ? " done" : " FAILED"));
  });
  for (const auto& rep : report.replications)
    for (const auto& f : rep.fits)
      if (!f.ok)
        report.failures.push_back("replication " + std::to_string(rep.index) + " spec " + f.spec.name() + ": " + f.error);
  report.summary = summarize_study(c, report.truth, report.test_truth, report.replications);
  return report;
}

}  // namespace dtrjm
