#pragma once

#include <nlohmann/json.hpp>

#include <string>
#include <vector>

#include "dtrjm/io/text.hpp"
#include "dtrjm/model/types.hpp"

namespace dtrjm::io {

using nlohmann::ordered_json;

inline ordered_json to_json(const Eigen::VectorXd& v) {
  ordered_json a = ordered_json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

inline Eigen::VectorXd vector_from_json(const ordered_json& j, Eigen::Index expected, const std::string& field) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != expected)
    throw IoError("field '" + field + "': expected array of " + std::to_string(expected) + " numbers");
  Eigen::VectorXd v(expected);
  for (Eigen::Index i = 0; i < expected; ++i) {
    if (!j[static_cast<std::size_t>(i)].is_number()) throw IoError("field '" + field + "': non-numeric entry");
    v[i] = j[static_cast<std::size_t>(i)].get<double>();
  }
  return v;
}

inline ordered_json to_json(const JointParams& p) {
  ordered_json j;
  j["phi_Y"] = to_json(p.phi_Y);
  j["phi_X"] = to_json(p.phi_X);
  j["tau_X2"] = p.tau_X2;
  j["phi_A"] = to_json(p.phi_A);
  j["phi_T"] = to_json(p.phi_T);
  j["lambda"] = p.lambda;
  j["alpha"] = p.alpha;
  ordered_json s = ordered_json::array();
  for (int r = 0; r < 3; ++r) {
    ordered_json row = ordered_json::array();
    for (int c = 0; c < 3; ++c) row.push_back(p.Sigma(r, c));
    s.push_back(row);
  }
  j["Sigma"] = s;
  j["mu"] = p.mu;
  j["tau2"] = p.tau2;
  return j;
}

/// Strict parse: every key must be known. Missing keys keep the values of
/// `base`.
inline JointParams params_from_json(const ordered_json& j, JointParams base = JointParams::simulation_truth()) {
  if (!j.is_object()) throw IoError("params: expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    const auto& v = it.value();
    auto num = [&](double& dst) {
      if (!v.is_number()) throw IoError("params." + k + ": expected a number");
      dst = v.get<double>();
    };
    if (k == "phi_Y") base.phi_Y = vector_from_json(v, 6, "params.phi_Y");
    else if (k == "phi_X") base.phi_X = vector_from_json(v, 2, "params.phi_X");
    else if (k == "phi_A") base.phi_A = vector_from_json(v, 4, "params.phi_A");
    else if (k == "phi_T") base.phi_T = vector_from_json(v, 2, "params.phi_T");
    else if (k == "tau_X2") num(base.tau_X2);
    else if (k == "lambda") num(base.lambda);
    else if (k == "alpha") num(base.alpha);
    else if (k == "mu") num(base.mu);
    else if (k == "tau2") num(base.tau2);
    else if (k == "Sigma") {
      if (!v.is_array() || v.size() != 3) throw IoError("params.Sigma: expected 3x3 array");
      for (int r = 0; r < 3; ++r) {
        const auto row = vector_from_json(v[static_cast<std::size_t>(r)], 3, "params.Sigma");
        for (int c = 0; c < 3; ++c) base.Sigma(r, c) = row[c];
      }
    } else {
      throw IoError("params: unknown key '" + k + "'");
    }
  }
  return base;
}

inline ordered_json to_json(const History& h) {
  ordered_json j;
  j["visit_times"] = h.visit_times;
  j["outcomes"] = h.outcomes;
  j["covariates"] = h.covariates;
  j["treatments"] = h.treatments;
  return j;
}

inline History history_from_json(const ordered_json& j) {
  if (!j.is_object()) throw IoError("history: expected an object");
  History h;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    try {
      if (k == "visit_times") h.visit_times = it.value().get<std::vector<double>>();
      else if (k == "outcomes") h.outcomes = it.value().get<std::vector<double>>();
      else if (k == "covariates") h.covariates = it.value().get<std::vector<double>>();
      else if (k == "treatments") h.treatments = it.value().get<std::vector<int>>();
      else throw IoError("history: unknown key '" + k + "'");
    } catch (const nlohmann::json::exception&) {
      throw IoError("history." + k + ": wrong type");
    }
  }
  h.validate();
  return h;
}

}  // namespace dtrjm::io
