#pragma once

// Rewards of fixed regimes and backwards-induction optimal regimes by
// forward Monte Carlo under the observational model.
//
// Rollout r draws u_W from the conditional frailty chain, then simulates
// the future marks under the regime. Expected outcomes are accumulated in
// Rao-Blackwellised form (the outcome probability given the simulated
// history, with the next covariate integrated out), which leaves the
// estimand unchanged and removes the Bernoulli noise of the final draw.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <utility>
#include <variant>
#include <vector>

#include "dtrjm/gcomp/family.hpp"
#include "dtrjm/gcomp/re_sampler.hpp"
#include "dtrjm/model/types.hpp"
#include "dtrjm/rng.hpp"

namespace dtrjm {

struct RewardOptions {
  int warmup = 100;
  int quadrature_nodes = 40;
  /// Extend the history with the average simulated mark at each decision
  /// (single plan for all rollouts) instead of deciding per rollout.
  bool mean_mark = false;
  /// Inner rollouts per decision when more than one decision remains.
  int inner_rollouts = 200;
  int batches = 20;

  void validate() const {
    if (warmup < 0 || quadrature_nodes < 1 || inner_rollouts < 1 || batches < 2)
      throw ModelError("RewardOptions: invalid settings");
  }
};

struct RewardEstimate {
  double value = 0.0;
  /// Plain sd / sqrt(R); ignores autocorrelation of the frailty chain.
  double mc_std_error = 0.0;
  /// Batch-means standard error, which accounts for that autocorrelation.
  double batch_std_error = 0.0;
  int R = 0;
  std::vector<int> arms;
  std::vector<double> arm_values;
  /// Batch-means standard error of each arm.
  std::vector<double> arm_std_errors;
  /// Batch-means standard error of (last arm - first arm) on common
  /// rollouts; zero with a single arm.
  double contrast_std_error = 0.0;
};

struct OptimalPlan {
  int stages = 0;
  int first_action = 0;
  /// Per rollout, bit s holds the action at decision s.
  std::vector<std::uint32_t> courses;

  [[nodiscard]] static std::vector<int> decode(std::uint32_t code, int stages) {
    std::vector<int> a(static_cast<std::size_t>(stages));
    for (int s = 0; s < stages; ++s) a[static_cast<std::size_t>(s)] = static_cast<int>((code >> s) & 1u);
    return a;
  }

  /// Recommended courses with their relative frequency, most frequent first.
  [[nodiscard]] std::vector<std::pair<std::vector<int>, double>> course_table() const {
    std::map<std::uint32_t, long> counts;
    for (auto c : courses) ++counts[c];
    std::vector<std::pair<std::uint32_t, long>> v(counts.begin(), counts.end());
    std::stable_sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    std::vector<std::pair<std::vector<int>, double>> out;
    for (const auto& [code, n] : v)
      out.emplace_back(decode(code, stages), static_cast<double>(n) / static_cast<double>(courses.size()));
    return out;
  }
};

namespace detail {

struct Summary {
  double mean = 0.0, se = 0.0, batch_se = 0.0;
};

inline Summary summarize(const std::vector<double>& v, int batches) {
  Summary s;
  const auto n = static_cast<double>(v.size());
  if (v.empty()) return s;
  s.mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  if (v.size() < 2) return s;
  double ss = 0.0;
  for (double x : v) ss += (x - s.mean) * (x - s.mean);
  s.se = std::sqrt(ss / (n - 1.0) / n);
  const int b = std::min<int>(batches, static_cast<int>(v.size()));
  if (b >= 2) {
    const std::size_t len = v.size() / static_cast<std::size_t>(b);
    std::vector<double> means;
    for (int k = 0; k < b; ++k) {
      double m = 0.0;
      for (std::size_t i = 0; i < len; ++i) m += v[static_cast<std::size_t>(k) * len + i];
      means.push_back(m / static_cast<double>(len));
    }
    const double mm = std::accumulate(means.begin(), means.end(), 0.0) / b;
    double sb = 0.0;
    for (double m : means) sb += (m - mm) * (m - mm);
    s.batch_se = std::sqrt(sb / (b - 1.0) / b);
  } else {
    s.batch_se = s.se;
  }
  return s;
}

inline std::vector<int> feasible_options(const Regime& regime, const History& h) {
  auto opts = regime.feasible.options(h.prior_treatments());
  if (opts.empty()) throw ModelError("reward: empty feasible set");
  std::sort(opts.begin(), opts.end());
  return opts;
}

inline Stream rollout_stream(const Stream& rng, int r) {
  return rng.child({static_cast<std::uint64_t>(Tag::rollout), static_cast<std::uint64_t>(r)});
}

inline Stream chain_stream(const Stream& rng) { return rng.child({static_cast<std::uint64_t>(Tag::re_chain)}); }

/// Non-anticipative backwards induction inside a rollout. Decisions use
/// only the simulated history: the frailty is integrated against its
/// discretised conditional law given that history.
template <MarkFamily F>
class Planner {
 public:
  Planner(const F& fam, const Regime& regime, const History& base, const RewardOptions& opts)
      : fam_(fam), regime_(regime), opts_(opts), rule_(opts.quadrature_nodes), post_(fam, base, rule_) {}

  /// Q value of action a at decision s given history h.
  double q_value(const History& h, int s, int a, Stream& rng) const {
    const double t = regime_.future_times[static_cast<std::size_t>(s)];
    const auto w = post_.weights(h);
    const auto& u = post_.nodes();
    double ey = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) ey += w[i] * fam_.expected_outcome(h, t, a, u[i]);
    double q = regime_.gamma[static_cast<std::size_t>(s)] * ey;
    if (s + 1 < regime_.stages()) {
      double cont = 0.0;
      for (int k = 0; k < opts_.inner_rollouts; ++k) {
        const double ui = u[categorical(w, rng)];
        History next = h;
        extend_history(next, a, t, fam_.sample_mark(h, t, a, ui, rng));
        cont += best(next, s + 1, rng).second;
      }
      q += cont / opts_.inner_rollouts;
    }
    return q;
  }

  /// (argmax action, max value) at decision s; ties go to the smaller action.
  std::pair<int, double> best(const History& h, int s, Stream& rng) const {
    int arg = -1;
    double val = 0.0;
    for (int a : feasible_options(regime_, h)) {
      const double q = q_value(h, s, a, rng);
      if (arg < 0 || q > val) {
        arg = a;
        val = q;
      }
    }
    return {arg, val};
  }

 private:
  static std::size_t categorical(const std::vector<double>& w, Stream& rng) {
    double u = rng.uniform(), c = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      c += w[i];
      if (u < c) return i;
    }
    return w.size() - 1;
  }

  const F& fam_;
  const Regime& regime_;
  RewardOptions opts_;
  GaussHermite rule_;
  FrailtyPosterior<F> post_;
};

/// Realised reward of one rollout with the first action pinned and later
/// actions given by `choose(history, stage, rng)`.
template <MarkFamily F, class Choose>
double rollout(const F& fam, const Regime& regime, const History& h, double u, int first, Choose&& choose,
               Stream& rng, std::uint32_t* course) {
  History hh = h;
  double total = 0.0;
  int a = first;
  std::uint32_t code = 0;
  const int S = regime.stages();
  for (int s = 0; s < S; ++s) {
    if (s > 0) a = choose(hh, s, rng);
    code |= static_cast<std::uint32_t>(a) << s;
    const double t = regime.future_times[static_cast<std::size_t>(s)];
    total += regime.gamma[static_cast<std::size_t>(s)] * fam.expected_outcome(hh, t, a, u);
    if (s + 1 < S) {
      const Mark w = fam.sample_mark(hh, t, a, u, rng);
      extend_history(hh, a, t, w);
    }
  }
  if (course) *course = code;
  return total;
}

}  // namespace detail

/// Reward of a fixed regime from R rollouts.
template <MarkFamily F>
RewardEstimate reward_fixed(const History& h, const Regime& regime, const F& fam, int R, const Stream& rng,
                            const RewardOptions& opts = {}) {
  h.validate();
  regime.validate(h);
  opts.validate();
  const auto* fixed = std::get_if<FixedRegime>(&regime.kind);
  if (!fixed) throw ModelError("reward_fixed: regime is not fixed");
  Stream chain = detail::chain_stream(rng);
  const auto us = sample_re_conditional(h, fam, R, chain, opts.warmup);
  std::vector<double> totals(static_cast<std::size_t>(R));
  for (int r = 0; r < R; ++r) {
    Stream rr = detail::rollout_stream(rng, r);
    const auto take = [&](const History&, int s, Stream&) { return fixed->treatments[static_cast<std::size_t>(s)]; };
    totals[static_cast<std::size_t>(r)] =
        detail::rollout(fam, regime, h, us[static_cast<std::size_t>(r)], fixed->treatments[0], take, rr, nullptr);
  }
  const auto s = detail::summarize(totals, opts.batches);
  RewardEstimate e;
  e.value = s.mean;
  e.mc_std_error = s.se;
  e.batch_std_error = s.batch_se;
  e.R = R;
  return e;
}

namespace detail {

template <MarkFamily F>
std::pair<OptimalPlan, RewardEstimate> optimal_nested(const History& h, const Regime& regime, const F& fam, int R,
                                                      const Stream& rng, const RewardOptions& opts,
                                                      std::optional<int> pinned_first) {
  Stream chain = chain_stream(rng);
  const auto us = sample_re_conditional(h, fam, R, chain, opts.warmup);
  const Planner<F> planner(fam, regime, h, opts);
  std::vector<int> arms = pinned_first ? std::vector<int>{*pinned_first} : feasible_options(regime, h);
  if (pinned_first && !regime.feasible.allows(h.prior_treatments(), *pinned_first))
    throw ModelError("reward_optimal: pinned first action is not feasible");
  RewardEstimate est;
  est.R = R;
  est.arms = arms;
  std::vector<std::vector<std::uint32_t>> courses(arms.size(), std::vector<std::uint32_t>(static_cast<std::size_t>(R)));
  std::vector<Summary> sums;
  std::vector<std::vector<double>> arm_totals;
  for (std::size_t k = 0; k < arms.size(); ++k) {
    std::vector<double>& totals = arm_totals.emplace_back(static_cast<std::size_t>(R));
    for (int r = 0; r < R; ++r) {
      // The same rollout stream for every arm gives common random numbers.
      Stream rr = rollout_stream(rng, r);
      const auto plan = [&](const History& hh, int s, Stream& st) {
        Stream dec = st.child({static_cast<std::uint64_t>(s)});
        return planner.best(hh, s, dec).first;
      };
      totals[static_cast<std::size_t>(r)] = rollout(fam, regime, h, us[static_cast<std::size_t>(r)], arms[k], plan, rr,
                                                    &courses[k][static_cast<std::size_t>(r)]);
    }
    sums.push_back(summarize(totals, opts.batches));
    est.arm_values.push_back(sums.back().mean);
    est.arm_std_errors.push_back(sums.back().batch_se);
  }
  if (arms.size() > 1) {
    std::vector<double> diff(static_cast<std::size_t>(R));
    for (std::size_t r = 0; r < diff.size(); ++r) diff[r] = arm_totals.back()[r] - arm_totals.front()[r];
    est.contrast_std_error = summarize(diff, opts.batches).batch_se;
  }
  std::size_t best = 0;
  for (std::size_t k = 1; k < arms.size(); ++k)
    if (sums[k].mean > sums[best].mean) best = k;
  est.value = sums[best].mean;
  est.mc_std_error = sums[best].se;
  est.batch_std_error = sums[best].batch_se;
  OptimalPlan plan;
  plan.stages = regime.stages();
  plan.first_action = arms[best];
  plan.courses = std::move(courses[best]);
  return {std::move(plan), std::move(est)};
}

struct MeanMarkNode {
  double value = 0.0;
  std::uint32_t course = 0;
  std::vector<int> arms;
  std::vector<Summary> arm_sums;
};

/// Value from decision s onward when each decision extends the history
/// with the average simulated mark, with the chosen course bits from s on.
template <MarkFamily F>
MeanMarkNode mean_mark_solve(const History& h, int s, const Regime& regime, const F& fam, int R,
                                const Stream& rng, const RewardOptions& opts, std::optional<int> pinned) {
  MeanMarkNode node;
  node.arms = pinned ? std::vector<int>{*pinned} : feasible_options(regime, h);
  const double t = regime.future_times[static_cast<std::size_t>(s)];
  const double g = regime.gamma[static_cast<std::size_t>(s)];
  int best = -1;
  std::uint32_t best_course = 0;
  for (int a : node.arms) {
    const Stream arm_rng = rng.child({static_cast<std::uint64_t>(s), static_cast<std::uint64_t>(a)});
    Stream chain = chain_stream(arm_rng);
    const auto us = sample_re_conditional(h, fam, R, chain, opts.warmup);
    std::vector<double> ey(static_cast<std::size_t>(R));
    Mark mean_w;
    for (int r = 0; r < R; ++r) {
      const double u = us[static_cast<std::size_t>(r)];
      ey[static_cast<std::size_t>(r)] = g * fam.expected_outcome(h, t, a, u);
      if (s + 1 < regime.stages()) {
        Stream rr = rollout_stream(arm_rng, r);
        const Mark w = fam.sample_mark(h, t, a, u, rr);
        mean_w.x += w.x / R;
        mean_w.y += w.y / R;
      }
    }
    Summary sm = summarize(ey, opts.batches);
    double q = sm.mean;
    std::uint32_t course = static_cast<std::uint32_t>(a) << s;
    if (s + 1 < regime.stages()) {
      History next = h;
      extend_history(next, a, t, mean_w);
      const auto sub = mean_mark_solve(next, s + 1, regime, fam, R, arm_rng, opts, std::nullopt);
      q += sub.value;
      course |= sub.course;
    }
    sm.mean = q;
    node.arm_sums.push_back(sm);
    if (best < 0 || q > node.value) {
      best = a;
      node.value = q;
      best_course = course;
    }
  }
  node.course = best_course;
  return node;
}

template <MarkFamily F>
std::pair<OptimalPlan, RewardEstimate> optimal_mean_mark(const History& h, const Regime& regime, const F& fam, int R,
                                                         const Stream& rng, const RewardOptions& opts,
                                                         std::optional<int> pinned_first) {
  const auto node = mean_mark_solve(h, 0, regime, fam, R, rng, opts, pinned_first);
  RewardEstimate est;
  est.R = R;
  est.arms = node.arms;
  std::size_t best = 0;
  for (std::size_t k = 0; k < node.arms.size(); ++k) {
    est.arm_values.push_back(node.arm_sums[k].mean);
    est.arm_std_errors.push_back(node.arm_sums[k].batch_se);
    if (node.arm_sums[k].mean > node.arm_sums[best].mean) best = k;
  }
  // Arms use separate frailty chains here, so their errors add.
  if (node.arms.size() > 1)
    est.contrast_std_error = std::hypot(node.arm_sums.front().batch_se, node.arm_sums.back().batch_se);
  est.value = node.value;
  est.mc_std_error = node.arm_sums[best].se;
  est.batch_std_error = node.arm_sums[best].batch_se;
  OptimalPlan plan;
  plan.stages = regime.stages();
  plan.first_action = node.arms[best];
  plan.courses.assign(static_cast<std::size_t>(R), node.course);
  return {std::move(plan), std::move(est)};
}

}  // namespace detail

/// Optimal regime by backwards induction. Every feasible first action is
/// evaluated on common rollouts; later actions are chosen inside each
/// rollout from the simulated history alone. `pinned_first` restricts the
/// first decision to one action (used for Benefit).
template <MarkFamily F>
std::pair<OptimalPlan, RewardEstimate> reward_optimal(const History& h, const Regime& regime, const F& fam, int R,
                                                      const Stream& rng, const RewardOptions& opts = {},
                                                      std::optional<int> pinned_first = std::nullopt) {
  h.validate();
  regime.validate(h);
  opts.validate();
  if (!regime.is_optimal()) throw ModelError("reward_optimal: regime is not optimal");
  if (R < 1) throw ModelError("reward_optimal: R must be >= 1");
  if (regime.stages() > 31) throw ModelError("reward_optimal: too many decision stages");
  return opts.mean_mark ? detail::optimal_mean_mark(h, regime, fam, R, rng, opts, pinned_first)
                        : detail::optimal_nested(h, regime, fam, R, rng, opts, pinned_first);
}

}  // namespace dtrjm
