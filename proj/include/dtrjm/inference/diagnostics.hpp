#pragma once

// Convergence diagnostics: split R-hat and the multi-chain effective sample
// size with Geyer's initial monotone sequence.

#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dtrjm/inference/flatten.hpp"
#include "dtrjm/inference/mcmc.hpp"
#include "dtrjm/io/text.hpp"

namespace dtrjm {

using ChainSet = std::vector<std::vector<double>>;

namespace detail {

inline double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double var_of(const std::vector<double>& v) {
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

/// Autocovariance at lags 0..max_lag (biased, divided by n).
inline std::vector<double> autocovariance(const std::vector<double>& v, std::size_t max_lag) {
  const std::size_t n = v.size();
  const double m = mean_of(v);
  std::vector<double> out(max_lag + 1, 0.0);
  for (std::size_t lag = 0; lag <= max_lag && lag < n; ++lag) {
    double s = 0.0;
    for (std::size_t t = 0; t + lag < n; ++t) s += (v[t] - m) * (v[t + lag] - m);
    out[lag] = s / static_cast<double>(n);
  }
  return out;
}

}  // namespace detail

/// Split R-hat. Empty when it is undefined: fewer than two chains, chains
/// too short to split, or zero variance in every chain.
inline std::optional<double> split_rhat(const ChainSet& chains) {
  if (chains.size() < 2) return std::nullopt;
  std::vector<std::vector<double>> halves;
  for (const auto& c : chains) {
    const std::size_t h = c.size() / 2;
    if (h < 2) return std::nullopt;
    halves.emplace_back(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(h));
    halves.emplace_back(c.end() - static_cast<std::ptrdiff_t>(h), c.end());
  }
  const double n = static_cast<double>(halves[0].size());
  const double m = static_cast<double>(halves.size());
  std::vector<double> means;
  double W = 0.0;
  for (const auto& h : halves) {
    means.push_back(detail::mean_of(h));
    W += detail::var_of(h);
  }
  W /= m;
  if (!(W > 0.0)) return std::nullopt;
  const double B = n * detail::var_of(means);
  const double var_plus = (n - 1.0) / n * W + B / n;
  return std::sqrt(var_plus / W);
}

/// Effective sample size across chains of equal length.
inline double effective_sample_size(const ChainSet& chains) {
  const std::size_t m = chains.size();
  if (m == 0) return 0.0;
  std::size_t n = chains[0].size();
  for (const auto& c : chains) n = std::min(n, c.size());
  if (n < 4) return static_cast<double>(m * n);
  const std::size_t max_lag = n - 1;
  std::vector<std::vector<double>> acov;
  std::vector<double> means;
  double W = 0.0;
  for (const auto& c : chains) {
    std::vector<double> v(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(n));
    acov.push_back(detail::autocovariance(v, max_lag));
    means.push_back(detail::mean_of(v));
    W += acov.back()[0] * n / (n - 1.0);
  }
  W /= static_cast<double>(m);
  if (!(W > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  const double B_over_n = m > 1 ? detail::var_of(means) : 0.0;
  const double var_plus = (n - 1.0) / n * W + B_over_n;
  auto rho = [&](std::size_t t) {
    double s = 0.0;
    for (const auto& a : acov) s += a[t];
    s /= static_cast<double>(m);
    return 1.0 - (W - s) / var_plus;
  };
  // Geyer: sum consecutive pairs while positive, enforcing monotonicity.
  double tau = -1.0;
  double prev_pair = std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t + 1 < n; t += 2) {
    double pair = rho(t) + rho(t + 1);
    if (pair < 0.0) break;
    pair = std::min(pair, prev_pair);
    prev_pair = pair;
    tau += 2.0 * pair;
  }
  tau = std::max(tau, 1.0 / std::log10(static_cast<double>(m * n)));
  return static_cast<double>(m * n) / tau;
}

struct ParameterDiagnostics {
  std::string name;
  double mean = 0.0;
  double sd = 0.0;
  double ess = 0.0;
  std::optional<double> rhat;
};

/// Per-parameter chains from a draw set.
inline std::vector<ChainSet> split_by_chain(const PosteriorDraws& d) {
  const auto names = parameter_names(d.spec);
  std::vector<ChainSet> out(names.size(), ChainSet(static_cast<std::size_t>(d.chains)));
  for (int k = 0; k < d.size(); ++k) {
    const auto v = flatten(d.params[k], d.spec);
    for (std::size_t p = 0; p < v.size(); ++p) out[p][static_cast<std::size_t>(d.chain[k])].push_back(v[p]);
  }
  return out;
}

/// ESS and split R-hat per parameter. R-hat is left empty for a single
/// chain; callers report that as a warning.
inline std::vector<ParameterDiagnostics> diagnostics(const PosteriorDraws& d) {
  const auto names = parameter_names(d.spec);
  const auto per = split_by_chain(d);
  std::vector<ParameterDiagnostics> out;
  for (std::size_t p = 0; p < names.size(); ++p) {
    ParameterDiagnostics pd;
    pd.name = names[p];
    std::vector<double> all;
    for (const auto& c : per[p]) all.insert(all.end(), c.begin(), c.end());
    if (!all.empty()) {
      pd.mean = detail::mean_of(all);
      pd.sd = all.size() > 1 ? std::sqrt(detail::var_of(all)) : 0.0;
    }
    pd.ess = effective_sample_size(per[p]);
    pd.rhat = split_rhat(per[p]);
    out.push_back(pd);
  }
  return out;
}

/// Trace export: chain,iter followed by the spec's parameters.
inline std::string draws_csv(const PosteriorDraws& d) {
  std::ostringstream out;
  out << "chain,iter";
  for (const auto& n : parameter_names(d.spec)) out << ',' << n;
  out << '\n';
  for (int k = 0; k < d.size(); ++k) {
    out << d.chain[k] << ',' << d.iteration[k];
    for (double v : flatten(d.params[k], d.spec)) out << ',' << io::fmt(v);
    out << '\n';
  }
  return out.str();
}

inline std::string diagnostics_csv(const std::vector<ParameterDiagnostics>& diag) {
  std::ostringstream out;
  out << "parameter,mean,sd,ess,rhat\n";
  for (const auto& p : diag)
    out << p.name << ',' << io::fmt(p.mean) << ',' << io::fmt(p.sd) << ',' << io::fmt(p.ess) << ','
        << (p.rhat ? io::fmt(*p.rhat) : std::string("NA")) << '\n';
  return out.str();
}

/// Reads draws written by draws_csv back for a known spec.
inline PosteriorDraws parse_draws_csv(const std::string& text, const ModelSpec& spec) {
  std::istringstream in(text);
  std::string line;
  const auto names = parameter_names(spec);
  std::string header = "chain,iter";
  for (const auto& n : names) header += "," + n;
  if (!std::getline(in, line) || line != header)
    throw io::IoError("draws csv: header does not match model spec " + spec.name());
  PosteriorDraws d;
  d.spec = spec;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = io::split(line);
    if (f.size() != names.size() + 2) throw io::IoError("draws csv line " + std::to_string(lineno) + ": wrong field count");
    d.chain.push_back(static_cast<int>(io::parse_int(f[0])));
    d.iteration.push_back(static_cast<int>(io::parse_int(f[1])));
    std::vector<double> v;
    for (std::size_t k = 2; k < f.size(); ++k) v.push_back(io::parse_double(f[k]));
    d.params.push_back(unflatten(v, spec));
    d.chains = std::max(d.chains, d.chain.back() + 1);
  }
  return d;
}

/// Reads draws, inferring the model spec from the header.
inline PosteriorDraws parse_draws_csv(const std::string& text) {
  const auto eol = text.find('\n');
  const std::string header = text.substr(0, eol == std::string::npos ? text.size() : eol);
  for (const char* name : {"Y", "YA", "YT", "YAT"}) {
    const auto spec = ModelSpec::parse(name);
    std::string expect = "chain,iter";
    for (const auto& n : parameter_names(spec)) expect += "," + n;
    if (header == expect) return parse_draws_csv(text, spec);
  }
  throw io::IoError("draws csv: header matches no model spec");
}

}  // namespace dtrjm
