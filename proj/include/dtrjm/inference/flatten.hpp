#pragma once

// Flat parameter vectors restricted to a model spec, used for CSV columns
// and diagnostics.

#include <string>
#include <vector>

#include "dtrjm/model/types.hpp"

namespace dtrjm {

inline std::vector<std::string> parameter_names(const ModelSpec& spec) {
  std::vector<std::string> out;
  for (int i = 0; i < 6; ++i) out.push_back("phi_Y" + std::to_string(i));
  out.insert(out.end(), {"phi_X0", "phi_X1", "tau_X2"});
  if (spec.treatment)
    for (int i = 0; i < 4; ++i) out.push_back("phi_A" + std::to_string(i));
  if (spec.visits) out.insert(out.end(), {"phi_T0", "phi_T1", "lambda", "alpha"});
  static const char* labels[3] = {"T", "W", "A"};
  const auto idx = spec.active_effects();
  for (std::size_t a = 0; a < idx.size(); ++a)
    for (std::size_t b = a; b < idx.size(); ++b)
      out.push_back(std::string("Sigma_") + labels[idx[a]] + labels[idx[b]]);
  return out;
}

inline std::vector<double> flatten(const JointParams& p, const ModelSpec& spec) {
  std::vector<double> out(p.phi_Y.data(), p.phi_Y.data() + 6);
  out.insert(out.end(), {p.phi_X[0], p.phi_X[1], p.tau_X2});
  if (spec.treatment) out.insert(out.end(), p.phi_A.data(), p.phi_A.data() + 4);
  if (spec.visits) out.insert(out.end(), {p.phi_T[0], p.phi_T[1], p.lambda, p.alpha});
  const auto idx = spec.active_effects();
  for (std::size_t a = 0; a < idx.size(); ++a)
    for (std::size_t b = a; b < idx.size(); ++b) out.push_back(p.Sigma(idx[a], idx[b]));
  return out;
}

inline JointParams unflatten(const std::vector<double>& v, const ModelSpec& spec) {
  if (v.size() != parameter_names(spec).size()) throw ModelError("unflatten: wrong number of values");
  JointParams p;
  std::size_t k = 0;
  for (int i = 0; i < 6; ++i) p.phi_Y[i] = v[k++];
  p.phi_X[0] = v[k++];
  p.phi_X[1] = v[k++];
  p.tau_X2 = v[k++];
  if (spec.treatment)
    for (int i = 0; i < 4; ++i) p.phi_A[i] = v[k++];
  if (spec.visits) {
    p.phi_T[0] = v[k++];
    p.phi_T[1] = v[k++];
    p.lambda = v[k++];
    p.alpha = v[k++];
  }
  p.Sigma.setZero();
  const auto idx = spec.active_effects();
  for (std::size_t a = 0; a < idx.size(); ++a)
    for (std::size_t b = a; b < idx.size(); ++b) p.Sigma(idx[a], idx[b]) = p.Sigma(idx[b], idx[a]) = v[k++];
  return p;
}

}  // namespace dtrjm
