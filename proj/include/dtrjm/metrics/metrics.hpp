#pragma once

// Study-level estimands (Benefit, Bias, agreement rate) and nested Monte
// Carlo error decompositions.

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dtrjm/gcomp/posterior.hpp"
#include "dtrjm/gcomp/reward.hpp"
#include "dtrjm/io/text.hpp"

namespace dtrjm {

struct Benefit {
  double value = 0.0;
  double std_error = 0.0;
  double treated = 0.0;
  double untreated = 0.0;
};

/// Reward with the first action pinned to 1 minus the reward with it
/// pinned to 0, later actions optimal in both. Both arms share rollouts.
template <MarkFamily F>
Benefit benefit(const History& h, const std::vector<double>& times, const F& fam, int R, const Stream& rng,
                const RewardOptions& opts = {}, std::vector<double> gamma = {}) {
  const Regime regime = Regime::optimal(times, std::move(gamma));
  const auto opts_first = regime.feasible.options(h.prior_treatments());
  if (opts_first.size() < 2) throw ModelError("benefit: both first actions must be feasible");
  const auto [plan, e] = reward_optimal(h, regime, fam, R, rng, opts);
  Benefit b;
  b.untreated = e.arm_values.front();
  b.treated = e.arm_values.back();
  b.value = b.treated - b.untreated;
  b.std_error = e.contrast_std_error;
  return b;
}

inline Benefit benefit(const History& h, const JointParams& truth, const std::vector<double>& times, int R,
                       const Stream& rng, const RewardOptions& opts = {}) {
  return benefit(h, times, SimFamily(truth), R, rng, opts);
}

struct BiasAr {
  double bias = 0.0;
  /// Standard error of the bias across replications.
  double std_error = 0.0;
  /// Fraction of replications recommending the true first action; empty
  /// for fixed regimes.
  std::optional<double> agreement_rate;
  double mean_estimate = 0.0;
  double truth = 0.0;
  int replications = 0;
};

/// Bias of per-replication estimates against the truth, and agreement of
/// recommended first actions with the true one.
inline BiasAr bias_and_ar(const std::vector<double>& estimates, double truth, const std::vector<int>& recommended = {},
                          std::optional<int> true_action = std::nullopt) {
  if (estimates.empty()) throw ModelError("bias_and_ar: need at least one replication");
  BiasAr out;
  out.replications = static_cast<int>(estimates.size());
  out.truth = truth;
  double s = 0.0;
  for (double v : estimates) s += v;
  out.mean_estimate = s / out.replications;
  out.bias = out.mean_estimate - truth;
  if (out.replications > 1) {
    double ss = 0.0;
    for (double v : estimates) ss += (v - out.mean_estimate) * (v - out.mean_estimate);
    out.std_error = std::sqrt(ss / (out.replications - 1) / out.replications);
  }
  if (true_action) {
    if (recommended.size() != estimates.size()) throw ModelError("bias_and_ar: one recommendation per replication");
    const auto hits = std::count(recommended.begin(), recommended.end(), *true_action);
    out.agreement_rate = static_cast<double>(hits) / out.replications;
  }
  return out;
}

inline BiasAr bias_and_ar(const std::vector<PosteriorReward>& reps, double truth,
                          std::optional<int> true_action = std::nullopt) {
  std::vector<double> est;
  std::vector<int> rec;
  for (const auto& r : reps) {
    est.push_back(r.mean);
    rec.push_back(r.recommended_first_action);
  }
  return bias_and_ar(est, truth, rec, true_action);
}

/// Bias and AR from raw per-replication posterior draws. The truth is
/// evaluated at `truth` with `truth_R` rollouts on its own substream.
inline BiasAr bias_and_ar(const History& h, const Regime& regime, const std::vector<PosteriorDraws>& reps,
                          const JointParams& truth, int R, const Stream& rng, const RewardOptions& opts = {},
                          int max_draws = 0, int truth_R = 100000) {
  const SimFamily fam(truth);
  const Stream truth_rng = rng.child({0});
  double true_value = 0.0;
  std::optional<int> true_action;
  if (regime.is_optimal()) {
    const auto [plan, e] = reward_optimal(h, regime, fam, truth_R, truth_rng, opts);
    true_value = e.value;
    true_action = plan.first_action;
  } else {
    true_value = reward_fixed(h, regime, fam, truth_R, truth_rng, opts).value;
  }
  std::vector<PosteriorReward> out;
  for (std::size_t s = 0; s < reps.size(); ++s)
    out.push_back(posterior_reward(h, regime, reps[s].params, R, rng.child({1, s}), opts, max_draws));
  return bias_and_ar(out, true_value, true_action);
}

/// theta(s, b, r): replication s, posterior draw b, rollout r.
struct NestedSamples {
  int S = 0, B = 0, R = 0;
  std::vector<double> values;

  [[nodiscard]] double at(int s, int b, int r) const {
    return values[(static_cast<std::size_t>(s) * B + b) * R + r];
  }
};

/// Per-(s, b) cell means and within-cell sample variances; sufficient for
/// the nested decomposition.
struct NestedSummary {
  int S = 0, B = 0, R = 0;
  std::vector<double> cell_mean;
  std::vector<double> cell_var;
};

inline NestedSummary summarize(const NestedSamples& x) {
  if (x.S < 1 || x.B < 1 || x.R < 1) throw ModelError("NestedSamples: empty index range");
  if (x.values.size() != static_cast<std::size_t>(x.S) * x.B * x.R) throw ModelError("NestedSamples: not rectangular");
  NestedSummary out{x.S, x.B, x.R, {}, {}};
  for (int s = 0; s < x.S; ++s)
    for (int b = 0; b < x.B; ++b) {
      double m = 0.0;
      for (int r = 0; r < x.R; ++r) m += x.at(s, b, r);
      m /= x.R;
      double v = 0.0;
      for (int r = 0; r < x.R; ++r) v += (x.at(s, b, r) - m) * (x.at(s, b, r) - m);
      out.cell_mean.push_back(m);
      out.cell_var.push_back(x.R > 1 ? v / (x.R - 1) : 0.0);
    }
  return out;
}

/// Variance components sigma^2 of each level, and their contributions to
/// the variance of the grand mean: sigma_s^2/S, sigma_b^2/(SB) and
/// sigma_r^2/(SBR). With one replication the replication level is absent.
struct VarianceComponents {
  std::optional<double> between_replication;
  double between_draw = 0.0;
  double within_rollout = 0.0;
  double replication_term = 0.0;
  double draw_term = 0.0;
  double rollout_term = 0.0;

  [[nodiscard]] double total() const { return replication_term + draw_term + rollout_term; }
  [[nodiscard]] double std_error() const { return std::sqrt(total()); }
};

namespace detail {

struct NestedMeanSquares {
  double within = 0.0, draws = 0.0, reps = 0.0;
};

inline NestedMeanSquares mean_squares(const NestedSummary& x) {
  const int S = x.S, B = x.B, R = x.R;
  if (x.cell_mean.size() != static_cast<std::size_t>(S) * B || x.cell_var.size() != x.cell_mean.size())
    throw ModelError("NestedSummary: not rectangular");
  NestedMeanSquares ms;
  double grand = 0.0;
  std::vector<double> rep_mean(static_cast<std::size_t>(S), 0.0);
  for (int s = 0; s < S; ++s) {
    for (int b = 0; b < B; ++b) {
      const auto k = static_cast<std::size_t>(s) * B + b;
      rep_mean[static_cast<std::size_t>(s)] += x.cell_mean[k] / B;
      ms.within += x.cell_var[k];
    }
    grand += rep_mean[static_cast<std::size_t>(s)] / S;
  }
  ms.within /= static_cast<double>(S) * B;
  if (B > 1) {
    double ss = 0.0;
    for (int s = 0; s < S; ++s)
      for (int b = 0; b < B; ++b) {
        const double d = x.cell_mean[static_cast<std::size_t>(s) * B + b] - rep_mean[static_cast<std::size_t>(s)];
        ss += d * d;
      }
    ms.draws = R * ss / (static_cast<double>(S) * (B - 1));
  }
  if (S > 1) {
    double ss = 0.0;
    for (double m : rep_mean) ss += (m - grand) * (m - grand);
    ms.reps = static_cast<double>(B) * R * ss / (S - 1);
  }
  return ms;
}

}  // namespace detail

/// Nested-ANOVA (method of moments) estimates of the replication, draw and
/// rollout variance components, truncated at zero.
inline VarianceComponents mc_error_three_way(const NestedSummary& x) {
  if (x.S < 2 || x.B < 2 || x.R < 2) throw ModelError("mc_error_three_way: need S, B, R >= 2");
  const auto ms = detail::mean_squares(x);
  VarianceComponents c;
  c.within_rollout = ms.within;
  c.between_draw = std::max(0.0, (ms.draws - ms.within) / x.R);
  c.between_replication = std::max(0.0, (ms.reps - ms.draws) / (static_cast<double>(x.B) * x.R));
  c.replication_term = *c.between_replication / x.S;
  c.draw_term = c.between_draw / (static_cast<double>(x.S) * x.B);
  c.rollout_term = c.within_rollout / (static_cast<double>(x.S) * x.B * x.R);
  return c;
}

inline VarianceComponents mc_error_three_way(const NestedSamples& x) { return mc_error_three_way(summarize(x)); }

/// Single-replication version: posterior-draw and rollout components only.
inline VarianceComponents mc_error_two_way(const NestedSummary& x) {
  if (x.S != 1) throw ModelError("mc_error_two_way: expects a single replication");
  if (x.B < 2 || x.R < 2) throw ModelError("mc_error_two_way: need B, R >= 2");
  const auto ms = detail::mean_squares(x);
  VarianceComponents c;
  c.within_rollout = ms.within;
  c.between_draw = std::max(0.0, (ms.draws - ms.within) / x.R);
  c.draw_term = c.between_draw / x.B;
  c.rollout_term = c.within_rollout / (static_cast<double>(x.B) * x.R);
  return c;
}

inline VarianceComponents mc_error(const NestedSummary& x) {
  return x.S == 1 ? mc_error_two_way(x) : mc_error_three_way(x);
}

inline VarianceComponents mc_error(const NestedSamples& x) { return mc_error(summarize(x)); }

/// Nested summary of posterior rewards across replications: cell (s, b)
/// holds draw b's reward and its rollout variance.
inline NestedSummary nested_summary(const std::vector<PosteriorReward>& reps) {
  if (reps.empty()) throw ModelError("nested_summary: no replications");
  NestedSummary out;
  out.S = static_cast<int>(reps.size());
  out.B = static_cast<int>(reps.front().per_draw.size());
  out.R = reps.front().per_draw.front().R;
  for (const auto& rep : reps) {
    if (static_cast<int>(rep.per_draw.size()) != out.B) throw ModelError("nested_summary: unequal draw counts");
    for (const auto& e : rep.per_draw) {
      if (e.R != out.R) throw ModelError("nested_summary: unequal rollout counts");
      out.cell_mean.push_back(e.value);
      out.cell_var.push_back(e.mc_std_error * e.mc_std_error * e.R);
    }
  }
  return out;
}

/// Hierarchical Gaussian fixture theta = mu + a_s + b_sb + e_sbr with the
/// given level variances. With `moment_matched` each level is centred
/// within its parent and rescaled so that its pooled sample variance equals
/// the target exactly; the ANOVA estimates are then known in closed form.
inline NestedSamples synthetic_nested(int S, int B, int R, double var_s, double var_b, double var_r, const Stream& rng,
                                      bool moment_matched = false, double mu = 0.0) {
  if (S < 1 || B < 1 || R < 1) throw ModelError("synthetic_nested: empty index range");
  std::vector<double> a(static_cast<std::size_t>(S)), bb(static_cast<std::size_t>(S) * B),
      e(static_cast<std::size_t>(S) * B * R);
  for (int s = 0; s < S; ++s) {
    Stream g = rng.child({static_cast<std::uint64_t>(Tag::fixture), static_cast<std::uint64_t>(s)});
    a[static_cast<std::size_t>(s)] = g.normal();
    for (int b = 0; b < B; ++b) {
      bb[static_cast<std::size_t>(s) * B + b] = g.normal();
      for (int r = 0; r < R; ++r) e[(static_cast<std::size_t>(s) * B + b) * R + r] = g.normal();
    }
  }
  // Centre groups of `len` consecutive values and scale to pooled variance 1.
  const auto match = [](std::vector<double>& v, std::size_t len) {
    if (len < 2) return;
    double ss = 0.0;
    for (std::size_t g = 0; g < v.size(); g += len) {
      double m = 0.0;
      for (std::size_t i = 0; i < len; ++i) m += v[g + i] / static_cast<double>(len);
      for (std::size_t i = 0; i < len; ++i) {
        v[g + i] -= m;
        ss += v[g + i] * v[g + i];
      }
    }
    const double sd = std::sqrt(ss / static_cast<double>(v.size() - v.size() / len));
    for (double& x : v) x /= sd;
  };
  if (moment_matched) {
    match(a, a.size());
    match(bb, static_cast<std::size_t>(B));
    match(e, static_cast<std::size_t>(R));
  }
  NestedSamples x{S, B, R, {}};
  x.values.reserve(e.size());
  for (int s = 0; s < S; ++s)
    for (int b = 0; b < B; ++b)
      for (int r = 0; r < R; ++r) {
        const auto k = static_cast<std::size_t>(s) * B + b;
        x.values.push_back(mu + std::sqrt(var_s) * a[static_cast<std::size_t>(s)] + std::sqrt(var_b) * bb[k] +
                           std::sqrt(var_r) * e[k * R + r]);
      }
  return x;
}

inline std::string nested_csv(const NestedSamples& x) {
  std::string out = "s,b,r,value\n";
  for (int s = 0; s < x.S; ++s)
    for (int b = 0; b < x.B; ++b)
      for (int r = 0; r < x.R; ++r)
        out += std::to_string(s) + ',' + std::to_string(b) + ',' + std::to_string(r) + ',' + io::fmt(x.at(s, b, r)) + '\n';
  return out;
}

/// Parses s,b,r,value rows (any order); indices must fill a rectangle.
inline NestedSamples parse_nested_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "s,b,r,value") throw io::IoError("nested CSV: expected header s,b,r,value");
  struct Row {
    long long s, b, r;
    double v;
  };
  std::vector<Row> rows;
  long long S = 0, B = 0, R = 0;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = io::split(line);
    if (f.size() != 4) throw io::IoError("nested CSV line " + std::to_string(lineno) + ": expected 4 fields");
    Row row{io::parse_int(f[0]), io::parse_int(f[1]), io::parse_int(f[2]), io::parse_double(f[3])};
    if (row.s < 0 || row.b < 0 || row.r < 0)
      throw io::IoError("nested CSV line " + std::to_string(lineno) + ": negative index");
    S = std::max(S, row.s + 1);
    B = std::max(B, row.b + 1);
    R = std::max(R, row.r + 1);
    rows.push_back(row);
  }
  if (rows.empty()) throw io::IoError("nested CSV: no rows");
  if (static_cast<long long>(rows.size()) != S * B * R) throw io::IoError("nested CSV: index ranges not rectangular");
  NestedSamples x{static_cast<int>(S), static_cast<int>(B), static_cast<int>(R), {}};
  x.values.assign(rows.size(), 0.0);
  std::vector<char> seen(rows.size(), 0);
  for (const auto& row : rows) {
    const auto k = static_cast<std::size_t>((row.s * B + row.b) * R + row.r);
    if (seen[k]) throw io::IoError("nested CSV: duplicate index");
    seen[k] = 1;
    x.values[k] = row.v;
  }
  return x;
}

}  // namespace dtrjm
