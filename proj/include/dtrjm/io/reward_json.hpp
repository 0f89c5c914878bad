#pragma once

// JSON reports for reward evaluations.

#include <cmath>
#include <vector>

#include "dtrjm/gcomp/posterior.hpp"
#include "dtrjm/gcomp/reward.hpp"
#include "dtrjm/io/json_io.hpp"
#include "dtrjm/metrics/metrics.hpp"

namespace dtrjm::io {

inline ordered_json course_table_json(const std::vector<std::pair<std::vector<int>, double>>& table) {
  ordered_json a = ordered_json::array();
  for (const auto& [course, freq] : table) {
    ordered_json e;
    e["course"] = course;
    e["frequency"] = freq;
    a.push_back(e);
  }
  return a;
}

inline ordered_json to_json(const RewardEstimate& e) {
  ordered_json j;
  j["value"] = e.value;
  j["mc_std_error"] = e.mc_std_error;
  j["batch_std_error"] = e.batch_std_error;
  j["rollouts"] = e.R;
  if (!e.arms.empty()) {
    ordered_json arms = ordered_json::array();
    for (std::size_t k = 0; k < e.arms.size(); ++k) {
      ordered_json a;
      a["first_action"] = e.arms[k];
      a["value"] = e.arm_values[k];
      a["batch_std_error"] = e.arm_std_errors[k];
      arms.push_back(a);
    }
    j["arms"] = arms;
    if (e.arms.size() > 1) j["contrast_std_error"] = e.contrast_std_error;
  }
  return j;
}

inline ordered_json to_json(const OptimalPlan& p) {
  ordered_json j;
  j["stages"] = p.stages;
  j["first_action"] = p.first_action;
  j["courses"] = course_table_json(p.course_table());
  return j;
}

inline ordered_json to_json(const VarianceComponents& c) {
  ordered_json j;
  if (c.between_replication) j["var_replication"] = *c.between_replication;
  j["var_draw"] = c.between_draw;
  j["var_rollout"] = c.within_rollout;
  if (c.between_replication) j["term_replication"] = c.replication_term;
  j["term_draw"] = c.draw_term;
  j["term_rollout"] = c.rollout_term;
  j["std_error"] = c.std_error();
  return j;
}

inline ordered_json to_json(const PosteriorReward& r, bool optimal) {
  ordered_json j;
  j["mean"] = r.mean;
  j["sd"] = r.sd;
  j["draws"] = r.per_draw.size();
  std::vector<double> q = r.values();
  std::sort(q.begin(), q.end());
  const auto quant = [&](double p) {
    const double pos = p * static_cast<double>(q.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, q.size() - 1);
    return q[lo] + (pos - static_cast<double>(lo)) * (q[hi] - q[lo]);
  };
  j["quantiles"] = {{"q025", quant(0.025)}, {"q25", quant(0.25)}, {"q50", quant(0.5)}, {"q75", quant(0.75)},
                    {"q975", quant(0.975)}};
  if (optimal) {
    j["recommended_first_action"] = r.recommended_first_action;
    ordered_json arms = ordered_json::array();
    for (std::size_t k = 0; k < r.arms.size(); ++k) arms.push_back({{"first_action", r.arms[k]}, {"mean", r.arm_means[k]}});
    j["arms"] = arms;
    j["courses"] = course_table_json(r.courses);
  }
  if (r.per_draw.size() > 1 && r.per_draw.front().R > 1) j["mc_error"] = to_json(mc_error(nested_summary({r})));
  ordered_json per = ordered_json::array();
  for (std::size_t k = 0; k < r.per_draw.size(); ++k)
    per.push_back({{"draw", r.draw_index[k]}, {"value", r.per_draw[k].value},
                   {"mc_std_error", r.per_draw[k].mc_std_error}});
  j["per_draw"] = per;
  return j;
}

}  // namespace dtrjm::io
