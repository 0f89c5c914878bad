#pragma once

// Posterior-predictive rewards: the reward evaluated at each retained
// posterior draw, and their average.

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include "dtrjm/gcomp/reward.hpp"
#include "dtrjm/inference/mcmc.hpp"
#include "dtrjm/parallel.hpp"

namespace dtrjm {

struct PosteriorReward {
  std::vector<int> draw_index;
  std::vector<RewardEstimate> per_draw;
  /// First action recommended at each draw (optimal regimes only).
  std::vector<int> first_actions;
  double mean = 0.0;
  double sd = 0.0;
  std::vector<int> arms;
  std::vector<double> arm_means;
  /// Action maximising the posterior-mean arm value; ties go to 0.
  int recommended_first_action = 0;
  /// Course frequencies pooled over draws and rollouts.
  std::vector<std::pair<std::vector<int>, double>> courses;

  [[nodiscard]] std::vector<double> values() const {
    std::vector<double> v;
    for (const auto& e : per_draw) v.push_back(e.value);
    return v;
  }
};

/// Evenly spaced subset of at most `max_draws` indices out of n.
inline std::vector<int> thin_indices(int n, int max_draws) {
  std::vector<int> out;
  if (max_draws <= 0 || max_draws >= n) {
    for (int i = 0; i < n; ++i) out.push_back(i);
    return out;
  }
  for (int k = 0; k < max_draws; ++k)
    out.push_back(static_cast<int>(static_cast<long long>(k) * n / max_draws));
  return out;
}

/// Draw b uses the stream (posterior_draw, b) under `rng`, so the result
/// does not depend on the thread count.
inline PosteriorReward posterior_reward(const History& h, const Regime& regime, const std::vector<JointParams>& draws,
                                        int R, const Stream& rng, const RewardOptions& opts = {}, int max_draws = 0,
                                        int threads = 1, std::optional<int> pinned_first = std::nullopt) {
  if (draws.empty()) throw ModelError("posterior_reward: no posterior draws");
  PosteriorReward out;
  out.draw_index = thin_indices(static_cast<int>(draws.size()), max_draws);
  const auto nb = out.draw_index.size();
  out.per_draw.resize(nb);
  std::vector<OptimalPlan> plans(nb);
  parallel_for(static_cast<int>(nb), threads, [&](int k) {
    const int b = out.draw_index[static_cast<std::size_t>(k)];
    const SimFamily fam(draws[static_cast<std::size_t>(b)]);
    const Stream s = rng.child({static_cast<std::uint64_t>(Tag::posterior_draw), static_cast<std::uint64_t>(b)});
    if (regime.is_optimal()) {
      auto [plan, est] = reward_optimal(h, regime, fam, R, s, opts, pinned_first);
      plans[static_cast<std::size_t>(k)] = std::move(plan);
      out.per_draw[static_cast<std::size_t>(k)] = std::move(est);
    } else {
      out.per_draw[static_cast<std::size_t>(k)] = reward_fixed(h, regime, fam, R, s, opts);
    }
  });
  double s1 = 0.0;
  for (const auto& e : out.per_draw) s1 += e.value;
  out.mean = s1 / static_cast<double>(nb);
  double ss = 0.0;
  for (const auto& e : out.per_draw) ss += (e.value - out.mean) * (e.value - out.mean);
  out.sd = nb > 1 ? std::sqrt(ss / static_cast<double>(nb - 1)) : 0.0;

  if (regime.is_optimal()) {
    out.arms = out.per_draw[0].arms;
    out.arm_means.assign(out.arms.size(), 0.0);
    std::map<std::vector<int>, double> pooled;
    for (std::size_t k = 0; k < nb; ++k) {
      out.first_actions.push_back(plans[k].first_action);
      for (std::size_t a = 0; a < out.arms.size(); ++a)
        out.arm_means[a] += out.per_draw[k].arm_values[a] / static_cast<double>(nb);
      for (const auto& [course, f] : plans[k].course_table()) pooled[course] += f / static_cast<double>(nb);
    }
    std::size_t best = 0;
    for (std::size_t a = 1; a < out.arms.size(); ++a)
      if (out.arm_means[a] > out.arm_means[best]) best = a;
    out.recommended_first_action = out.arms[best];
    out.courses.assign(pooled.begin(), pooled.end());
    std::stable_sort(out.courses.begin(), out.courses.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
  }
  return out;
}

}  // namespace dtrjm
