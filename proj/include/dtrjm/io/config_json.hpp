#pragma once

// Strict JSON for configuration structs: unknown keys and wrongly typed
// values are errors that name the offending field.

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "dtrjm/gcomp/reward.hpp"
#include "dtrjm/inference/mcmc.hpp"
#include "dtrjm/inference/priors.hpp"
#include "dtrjm/io/json_io.hpp"
#include "dtrjm/simulate/simulate.hpp"

namespace dtrjm::io {

/// Reads typed fields from a JSON object; finish() rejects keys that were
/// never asked for.
class Fields {
 public:
  Fields(const ordered_json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j.is_object()) throw IoError(path_ + ": expected an object");
  }

  Fields(const Fields&) = delete;
  Fields& operator=(const Fields&) = delete;

  [[nodiscard]] bool has(const std::string& key) const { return j_.contains(key); }

  const ordered_json* raw(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  void get(const std::string& key, int& dst) {
    if (const auto* v = raw(key)) {
      if (!v->is_number_integer()) fail(key, "expected an integer");
      const auto x = v->get<long long>();
      if (x < INT32_MIN || x > INT32_MAX) fail(key, "integer out of range");
      dst = static_cast<int>(x);
    }
  }

  void get(const std::string& key, std::uint64_t& dst) {
    if (const auto* v = raw(key)) {
      if (!v->is_number_unsigned()) fail(key, "expected a non-negative integer");
      dst = v->get<std::uint64_t>();
    }
  }

  void get(const std::string& key, double& dst) {
    if (const auto* v = raw(key)) {
      if (!v->is_number()) fail(key, "expected a number");
      dst = v->get<double>();
    }
  }

  void get(const std::string& key, bool& dst) {
    if (const auto* v = raw(key)) {
      if (!v->is_boolean()) fail(key, "expected true or false");
      dst = v->get<bool>();
    }
  }

  void get(const std::string& key, std::string& dst) {
    if (const auto* v = raw(key)) {
      if (!v->is_string()) fail(key, "expected a string");
      dst = v->get<std::string>();
    }
  }

  void get(const std::string& key, std::vector<double>& dst) {
    if (const auto* v = raw(key)) {
      if (!v->is_array()) fail(key, "expected an array of numbers");
      dst.clear();
      for (const auto& e : *v) {
        if (!e.is_number()) fail(key, "expected an array of numbers");
        dst.push_back(e.get<double>());
      }
    }
  }

  void get(const std::string& key, std::vector<int>& dst) {
    if (const auto* v = raw(key)) {
      if (!v->is_array()) fail(key, "expected an array of integers");
      dst.clear();
      for (const auto& e : *v) {
        if (!e.is_number_integer()) fail(key, "expected an array of integers");
        dst.push_back(e.get<int>());
      }
    }
  }

  void get(const std::string& key, std::vector<std::string>& dst) {
    if (const auto* v = raw(key)) {
      if (!v->is_array()) fail(key, "expected an array of strings");
      dst.clear();
      for (const auto& e : *v) {
        if (!e.is_string()) fail(key, "expected an array of strings");
        dst.push_back(e.get<std::string>());
      }
    }
  }

  [[nodiscard]] std::string child(const std::string& key) const { return path_ + "." + key; }

  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    throw IoError(child(key) + ": " + what);
  }

  void finish() {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw IoError(path_ + ": unknown key '" + it.key() + "'");
  }

 private:
  const ordered_json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

inline ordered_json to_json(const McmcConfig& c) {
  ordered_json j;
  j["chains"] = c.chains;
  j["iterations"] = c.iterations;
  j["burn_in"] = c.burn_in;
  j["thin"] = c.thin;
  j["target_multi"] = c.target_multi;
  j["target_scalar"] = c.target_scalar;
  j["initial_proposal_sd"] = c.initial_proposal_sd;
  j["adapt_start"] = c.adapt_start;
  j["seed"] = c.seed;
  return j;
}

/// `threads` is a run-time choice and never part of a config file.
inline McmcConfig mcmc_config_from_json(const ordered_json& j, McmcConfig c = {}, const std::string& path = "mcmc") {
  Fields f(j, path);
  f.get("chains", c.chains);
  f.get("iterations", c.iterations);
  f.get("burn_in", c.burn_in);
  f.get("thin", c.thin);
  f.get("target_multi", c.target_multi);
  f.get("target_scalar", c.target_scalar);
  f.get("initial_proposal_sd", c.initial_proposal_sd);
  f.get("adapt_start", c.adapt_start);
  f.get("seed", c.seed);
  f.finish();
  return c;
}

inline ordered_json to_json(const Priors& p) {
  ordered_json j;
  j["coef_var"] = p.coef_var;
  j["ig_shape"] = p.ig_shape;
  j["ig_scale"] = p.ig_scale;
  j["log_scale_var"] = p.log_scale_var;
  j["iw_extra_dof"] = p.iw_extra_dof;
  return j;
}

inline Priors priors_from_json(const ordered_json& j, Priors p = {}, const std::string& path = "priors") {
  Fields f(j, path);
  f.get("coef_var", p.coef_var);
  f.get("ig_shape", p.ig_shape);
  f.get("ig_scale", p.ig_scale);
  f.get("log_scale_var", p.log_scale_var);
  f.get("iw_extra_dof", p.iw_extra_dof);
  f.finish();
  return p;
}

inline ordered_json to_json(const RewardOptions& o) {
  ordered_json j;
  j["warmup"] = o.warmup;
  j["quadrature_nodes"] = o.quadrature_nodes;
  j["mean_mark"] = o.mean_mark;
  j["inner_rollouts"] = o.inner_rollouts;
  j["batches"] = o.batches;
  return j;
}

inline RewardOptions reward_options_from_json(const ordered_json& j, RewardOptions o = {},
                                              const std::string& path = "reward") {
  Fields f(j, path);
  f.get("warmup", o.warmup);
  f.get("quadrature_nodes", o.quadrature_nodes);
  f.get("mean_mark", o.mean_mark);
  f.get("inner_rollouts", o.inner_rollouts);
  f.get("batches", o.batches);
  f.finish();
  return o;
}

inline ordered_json to_json(const CensorWindow& c) {
  ordered_json j;
  j["lower"] = c.lower;
  j["upper"] = c.upper;
  return j;
}

inline CensorWindow censor_from_json(const ordered_json& j, CensorWindow c = {}, const std::string& path = "censor") {
  Fields f(j, path);
  f.get("lower", c.lower);
  f.get("upper", c.upper);
  f.finish();
  return c;
}

inline ordered_json to_json(const ModelSpec& s) { return s.name(); }

}  // namespace dtrjm::io
