#pragma once

// Study configuration files and report export.
//
//   config.json
//   data/rep_<s>.csv (+ .json sidecar)
//   draws/rep_<s>_<spec>.csv
//   metrics/summary.csv, replications.csv, posterior.csv, test_set.csv
//   manifest.json

#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "dtrjm/inference/diagnostics.hpp"
#include "dtrjm/io/config_json.hpp"
#include "dtrjm/io/dataset_io.hpp"
#include "dtrjm/study/study.hpp"

#ifndef DTRJM_VERSION
#define DTRJM_VERSION "0.0.0"
#endif

namespace dtrjm::io {

inline ordered_json to_json(const StudyConfig& c) {
  ordered_json j;
  j["n_train"] = c.n_train;
  j["n_test"] = c.n_test;
  j["replications"] = c.replications;
  ordered_json specs = ordered_json::array();
  for (const auto& s : c.specs) specs.push_back(s.name());
  j["specs"] = specs;
  auto mc = to_json(c.mcmc);
  mc.erase("seed");
  j["mcmc"] = mc;
  j["priors"] = to_json(c.priors);
  j["scenario"] = scenario_name(c.scenario);
  j["seed"] = c.seed;
  j["params"] = to_json(c.params);
  j["censor"] = to_json(c.censor);
  j["future_times"] = c.future_times;
  j["gamma"] = c.gamma;
  j["profiles"] = c.profiles;
  j["rollouts"] = c.rollouts;
  j["max_draws"] = c.max_draws;
  j["truth_rollouts"] = c.truth_rollouts;
  j["test_rollouts"] = c.test_rollouts;
  j["test_draws"] = c.test_draws;
  j["test_truth_rollouts"] = c.test_truth_rollouts;
  j["reward"] = to_json(c.reward);
  return j;
}

inline StudyConfig study_config_from_json(const ordered_json& j, StudyConfig c = {}, const std::string& path = "study") {
  Fields f(j, path);
  f.get("n_train", c.n_train);
  f.get("n_test", c.n_test);
  f.get("replications", c.replications);
  std::vector<std::string> specs;
  if (f.has("specs")) {
    f.get("specs", specs);
    c.specs.clear();
    try {
      for (const auto& s : specs) c.specs.push_back(ModelSpec::parse(s));
    } catch (const ModelError& e) {
      f.fail("specs", e.what());
    }
  }
  if (const auto* v = f.raw("mcmc")) {
    if (v->is_object() && v->contains("seed")) f.fail("mcmc", "chain seeds derive from the study seed; remove 'seed'");
    c.mcmc = mcmc_config_from_json(*v, c.mcmc, f.child("mcmc"));
  }
  if (const auto* v = f.raw("priors")) c.priors = priors_from_json(*v, c.priors, f.child("priors"));
  std::string scen;
  if (f.has("scenario")) {
    f.get("scenario", scen);
    try {
      c.scenario = parse_scenario(scen);
    } catch (const ModelError& e) {
      f.fail("scenario", e.what());
    }
  }
  f.get("seed", c.seed);
  if (const auto* v = f.raw("params")) c.params = params_from_json(*v, c.params);
  if (const auto* v = f.raw("censor")) c.censor = censor_from_json(*v, c.censor, f.child("censor"));
  f.get("future_times", c.future_times);
  f.get("gamma", c.gamma);
  f.get("profiles", c.profiles);
  f.get("rollouts", c.rollouts);
  f.get("max_draws", c.max_draws);
  f.get("truth_rollouts", c.truth_rollouts);
  f.get("test_rollouts", c.test_rollouts);
  f.get("test_draws", c.test_draws);
  f.get("test_truth_rollouts", c.test_truth_rollouts);
  if (const auto* v = f.raw("reward")) c.reward = reward_options_from_json(*v, c.reward, f.child("reward"));
  f.finish();
  return c;
}

inline std::string config_hash(const ordered_json& config) { return hex64(fnv1a(config.dump())); }

namespace detail {

inline std::string opt(const std::optional<double>& v) { return v ? fmt(*v) : std::string(); }

}  // namespace detail

inline std::string summary_csv(const StudyReport& r) {
  std::ostringstream out;
  out << "scenario,spec,n,profile,regime,replications,truth,mean_estimate,bias,mc_error,se_mc,avg_se,agreement_rate,"
         "var_replication,var_draw,var_rollout,term_replication,term_draw,term_rollout\n";
  for (const auto& row : r.summary) {
    out << scenario_name(r.config.scenario) << ',' << row.spec << ',' << r.config.n_train << ',' << row.profile << ','
        << row.regime << ',' << row.replications << ',' << fmt(row.truth) << ',' << fmt(row.mean_estimate) << ','
        << fmt(row.bias) << ',' << fmt(row.mc_error) << ',' << fmt(row.se_mc) << ',' << fmt(row.avg_se) << ','
        << detail::opt(row.agreement_rate) << ',';
    if (row.components) {
      const auto& c = *row.components;
      out << detail::opt(c.between_replication) << ',' << fmt(c.between_draw) << ',' << fmt(c.within_rollout) << ','
          << fmt(c.replication_term) << ',' << fmt(c.draw_term) << ',' << fmt(c.rollout_term);
    } else {
      out << ",,,,,";
    }
    out << '\n';
  }
  return out.str();
}

inline std::string replications_csv(const StudyReport& r) {
  std::ostringstream out;
  out << "replication,spec,profile,regime,estimate,posterior_sd,recommended_first_action,arm0,arm1\n";
  for (const auto& rep : r.replications)
    for (const auto& f : rep.fits) {
      if (!f.ok) continue;
      for (const auto& p : f.profiles) {
        const auto& o = p.optimal;
        out << rep.index << ',' << f.spec.name() << ',' << profile_label(p.profile) << ",optimal," << fmt(o.mean)
            << ',' << fmt(o.sd) << ',' << o.recommended_first_action << ',' << fmt(o.arm_means.front()) << ','
            << fmt(o.arm_means.back()) << '\n';
        out << rep.index << ',' << f.spec.name() << ',' << profile_label(p.profile) << ",never_treated,"
            << fmt(p.never.mean) << ',' << fmt(p.never.sd) << ",,,\n";
      }
    }
  return out.str();
}

inline std::string posterior_csv(const StudyReport& r) {
  std::ostringstream out;
  out << "replication,spec,parameter,truth,mean,sd,lower,upper,rhat,ess,covered\n";
  for (const auto& rep : r.replications)
    for (const auto& f : rep.fits)
      for (const auto& p : f.parameters)
        out << rep.index << ',' << f.spec.name() << ',' << p.name << ',' << fmt(p.truth) << ',' << fmt(p.mean) << ','
            << fmt(p.sd) << ',' << fmt(p.lower) << ',' << fmt(p.upper) << ',' << detail::opt(p.rhat) << ','
            << fmt(p.ess) << ',' << (p.covered() ? 1 : 0) << '\n';
  return out.str();
}

/// Per test individual: truth, then per spec the bias averaged over
/// replications and the agreement rate.
inline std::string test_set_csv(const StudyReport& r) {
  std::ostringstream out;
  out << "individual,x1,y1,true_optimal,true_first_action,benefit";
  for (const auto& s : r.config.specs) out << ",bias_" << s.name() << ",ar_" << s.name();
  out << '\n';
  const auto& tt = r.test_truth;
  for (std::size_t i = 0; i < tt.histories.size(); ++i) {
    out << i << ',' << fmt(tt.histories[i].covariates[0]) << ',' << fmt(tt.histories[i].outcomes[0]) << ','
        << fmt(tt.optimal[i]) << ',' << tt.first_action[i] << ',' << fmt(tt.benefit[i]);
    for (const auto& s : r.config.specs) {
      double sum = 0.0, hits = 0.0;
      int n = 0;
      for (const auto& rep : r.replications)
        for (const auto& f : rep.fits)
          if (f.ok && f.spec == s) {
            sum += f.test.value[i];
            hits += f.test.first_action[i] == tt.first_action[i];
            ++n;
          }
      if (n == 0) {
        out << ",,";
      } else {
        out << ',' << fmt(sum / n - tt.optimal[i]) << ',' << fmt(hits / n);
      }
    }
    out << '\n';
  }
  return out.str();
}

inline ordered_json manifest(const StudyReport& r, const std::vector<std::string>& files) {
  const auto cfg = to_json(r.config);
  ordered_json m;
  m["version"] = DTRJM_VERSION;
  m["config_hash"] = config_hash(cfg);
  m["seed"] = r.config.seed;
  m["config"] = cfg;
  ordered_json truth = ordered_json::array();
  for (const auto& t : r.truth) {
    ordered_json e;
    e["profile"] = profile_label(t.profile);
    e["optimal"] = t.optimal;
    e["first_action"] = t.first_action;
    e["treated"] = t.treated;
    e["untreated"] = t.untreated;
    e["never_treated"] = t.never;
    truth.push_back(e);
  }
  m["truth"] = truth;
  m["failures"] = r.failures;
  m["files"] = files;
  return m;
}

/// Writes every artifact under `dir`; rewriting gives identical bytes.
inline std::vector<std::string> export_report(const StudyReport& r, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  for (const char* sub : {"data", "draws", "metrics"}) {
    fs::create_directories(dir / sub, ec);
    if (ec) throw IoError("cannot create '" + (dir / sub).string() + "': " + ec.message());
  }
  std::vector<std::string> files;
  const auto put = [&](const std::string& rel, const std::string& content) {
    write_file((dir / rel).string(), content);
    files.push_back(rel);
  };
  put("config.json", to_json(r.config).dump(2) + "\n");
  for (const auto& rep : r.replications) {
    const auto base = "data/rep_" + std::to_string(rep.index);
    put(base + ".csv", dataset_csv(rep.data));
    put(base + ".json", dataset_sidecar(rep.data).dump(2) + "\n");
    for (const auto& f : rep.fits)
      if (f.ok) put("draws/rep_" + std::to_string(rep.index) + "_" + f.spec.name() + ".csv", draws_csv(f.draws));
  }
  put("metrics/summary.csv", summary_csv(r));
  put("metrics/replications.csv", replications_csv(r));
  put("metrics/posterior.csv", posterior_csv(r));
  put("metrics/test_set.csv", test_set_csv(r));
  files.push_back("manifest.json");
  write_file((dir / "manifest.json").string(), manifest(r, files).dump(2) + "\n");
  return files;
}

}  // namespace dtrjm::io
