// dtrjm: simulate, fit, evaluate and optimise treatment regimes.
//
// Exit codes: 0 success, 1 invalid input or configuration, 2 run-time
// failure. Every run writes <out>/<command>_run.json holding the effective
// configuration, its hash and the master seed; rerunning with that file
// and seed reproduces all outputs byte for byte.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dtrjm/gcomp/posterior.hpp"
#include "dtrjm/gcomp/reward.hpp"
#include "dtrjm/inference/diagnostics.hpp"
#include "dtrjm/inference/mcmc.hpp"
#include "dtrjm/io/config_json.hpp"
#include "dtrjm/io/dataset_io.hpp"
#include "dtrjm/io/reward_json.hpp"
#include "dtrjm/metrics/metrics.hpp"
#include "dtrjm/simulate/simulate.hpp"
#include "dtrjm/study/report.hpp"
#include "dtrjm/study/study.hpp"

namespace fs = std::filesystem;
using dtrjm::io::ordered_json;
using namespace dtrjm;

namespace {

constexpr int kInvalid = 1;
constexpr int kRuntime = 2;

/// Bad input detected before any work starts.
struct InvalidInput : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
  int threads = 1;
  bool verbose = false;
};

void log(const Common& c, const std::string& msg) {
  if (c.verbose) std::cerr << "[dtrjm] " << msg << '\n';
}

ordered_json load_config(const Common& c) {
  if (c.config.empty()) return ordered_json::object();
  std::string text;
  try {
    text = io::read_file(c.config);
  } catch (const io::IoError& e) {
    throw InvalidInput(e.what());
  }
  try {
    return ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    // Translate the byte offset into a line number.
    const auto upto = text.substr(0, std::min<std::size_t>(e.byte, text.size()));
    const auto line = 1 + std::count(upto.begin(), upto.end(), '\n');
    throw InvalidInput(c.config + ":" + std::to_string(line) + ": invalid JSON (" + e.what() + ")");
  }
}

void prepare_out(const Common& c) {
  std::error_code ec;
  fs::create_directories(c.out, ec);
  if (ec) throw InvalidInput("cannot create output directory '" + c.out + "': " + ec.message());
}

/// Writes the run record and prints the line that identifies the run.
void finish_run(const Common& c, const std::string& command, const ordered_json& config, std::uint64_t seed,
                const std::vector<std::string>& outputs) {
  ordered_json run;
  run["command"] = command;
  run["version"] = DTRJM_VERSION;
  run["seed"] = seed;
  run["config_hash"] = io::config_hash(config);
  run["config"] = config;
  run["outputs"] = outputs;
  io::write_file((fs::path(c.out) / (command + "_run.json")).string(), run.dump(2) + "\n");
  std::cout << command << ": seed=" << seed << " config_hash=" << io::config_hash(config) << '\n';
}

std::vector<double> parse_number_list(const std::string& s, const std::string& what) {
  std::vector<double> out;
  try {
    for (auto f : io::split(s)) out.push_back(io::parse_double(f));
  } catch (const io::IoError&) {
    throw InvalidInput(what + ": expected comma-separated numbers, got '" + s + "'");
  }
  return out;
}

// ---------------------------------------------------------------- simulate

struct SimulateConfig {
  int n = 300;
  std::uint64_t seed = 1;
  Scenario scenario = Scenario::full_correlation;
  JointParams params = JointParams::simulation_truth();
  CensorWindow censor;

  [[nodiscard]] ordered_json to_json() const {
    ordered_json j;
    j["n"] = n;
    j["seed"] = seed;
    j["scenario"] = scenario_name(scenario);
    j["params"] = io::to_json(params);
    j["censor"] = io::to_json(censor);
    return j;
  }

  static SimulateConfig from_json(const ordered_json& j) {
    SimulateConfig c;
    io::Fields f(j, "simulate");
    f.get("n", c.n);
    f.get("seed", c.seed);
    std::string s = scenario_name(c.scenario);
    f.get("scenario", s);
    try {
      c.scenario = parse_scenario(s);
    } catch (const ModelError& e) {
      f.fail("scenario", e.what());
    }
    if (const auto* v = f.raw("params")) c.params = io::params_from_json(*v, c.params);
    if (const auto* v = f.raw("censor")) c.censor = io::censor_from_json(*v, c.censor, "simulate.censor");
    f.finish();
    return c;
  }
};

struct SimulateFlags {
  std::optional<int> n;
  std::optional<std::string> scenario;
};

int run_simulate(const Common& common, const SimulateFlags& flags) {
  SimulateConfig cfg;
  JointParams truth;
  try {
    cfg = SimulateConfig::from_json(load_config(common));
    if (flags.n) cfg.n = *flags.n;
    if (flags.scenario) cfg.scenario = parse_scenario(*flags.scenario);
    if (common.seed) cfg.seed = *common.seed;
    if (cfg.n < 1) throw InvalidInput("simulate: n must be >= 1");
    truth = cfg.params;
    truth.Sigma = scenario_sigma(cfg.params.Sigma, cfg.scenario);
    truth.validate({0, 1, 2}, true);
    prepare_out(common);
  } catch (const std::exception& e) {
    throw InvalidInput(e.what());
  }
  log(common, "simulating " + std::to_string(cfg.n) + " individuals");
  const Dataset d = generate_dataset(cfg.n, truth, cfg.seed, cfg.censor);
  io::write_dataset(d, fs::path(common.out) / "dataset.csv");
  int visits = 0;
  for (const auto& p : d.paths) visits += p.n_visits();
  std::cout << "simulate: individuals=" << d.size() << " visits=" << visits << '\n';
  finish_run(common, "simulate", cfg.to_json(), cfg.seed, {"dataset.csv", "dataset.json"});
  return 0;
}

// --------------------------------------------------------------------- fit

struct FitConfig {
  std::string data;
  ModelSpec spec = ModelSpec::full();
  std::uint64_t seed = 1;
  McmcConfig mcmc;
  Priors priors;

  [[nodiscard]] ordered_json to_json() const {
    ordered_json j;
    j["data"] = data;
    j["spec"] = spec.name();
    j["seed"] = seed;
    auto mc = io::to_json(mcmc);
    mc.erase("seed");
    j["mcmc"] = mc;
    j["priors"] = io::to_json(priors);
    return j;
  }

  static FitConfig from_json(const ordered_json& j) {
    FitConfig c;
    io::Fields f(j, "fit");
    f.get("data", c.data);
    std::string spec = c.spec.name();
    f.get("spec", spec);
    try {
      c.spec = ModelSpec::parse(spec);
    } catch (const ModelError& e) {
      f.fail("spec", e.what());
    }
    f.get("seed", c.seed);
    if (const auto* v = f.raw("mcmc")) {
      if (v->is_object() && v->contains("seed")) f.fail("mcmc", "use the top-level seed");
      c.mcmc = io::mcmc_config_from_json(*v, c.mcmc, "fit.mcmc");
    }
    if (const auto* v = f.raw("priors")) c.priors = io::priors_from_json(*v, c.priors, "fit.priors");
    f.finish();
    return c;
  }
};

struct FitFlags {
  std::optional<std::string> data, spec;
  std::optional<int> chains, iterations, burn_in, thin;
};

int run_fit(const Common& common, const FitFlags& flags) {
  FitConfig cfg;
  Dataset data;
  try {
    cfg = FitConfig::from_json(load_config(common));
    if (flags.data) cfg.data = *flags.data;
    if (flags.spec) cfg.spec = ModelSpec::parse(*flags.spec);
    if (flags.chains) cfg.mcmc.chains = *flags.chains;
    if (flags.iterations) cfg.mcmc.iterations = *flags.iterations;
    if (flags.burn_in) cfg.mcmc.burn_in = *flags.burn_in;
    if (flags.thin) cfg.mcmc.thin = *flags.thin;
    if (common.seed) cfg.seed = *common.seed;
    if (cfg.data.empty()) throw InvalidInput("fit: no dataset given (--data)");
    cfg.mcmc.seed = cfg.seed;
    cfg.mcmc.threads = common.threads;
    cfg.mcmc.validate();
    cfg.priors.validate();
    data = io::read_dataset(cfg.data);
    for (const auto& p : data.paths) p.validate();
    prepare_out(common);
  } catch (const std::exception& e) {
    throw InvalidInput(e.what());
  }
  log(common, "fitting " + cfg.spec.name() + " to " + std::to_string(data.size()) + " individuals");
  const auto draws = run_mcmc(data.paths, cfg.spec, cfg.priors, cfg.mcmc);
  const auto diag = diagnostics(draws);
  const fs::path out(common.out);
  io::write_file((out / "draws.csv").string(), draws_csv(draws));
  io::write_file((out / "diagnostics.csv").string(), diagnostics_csv(diag));

  ordered_json rep;
  rep["spec"] = cfg.spec.name();
  rep["draws"] = draws.size();
  rep["chains"] = draws.chains;
  ordered_json acc = ordered_json::array();
  for (const auto& m : draws.acceptance) {
    ordered_json a;
    for (const auto& [k, v] : m) a[k] = v;
    acc.push_back(a);
  }
  rep["acceptance"] = acc;
  double max_rhat = 0.0, min_ess = 1e300;
  ordered_json warnings = ordered_json::array();
  for (const auto& d : diag) {
    min_ess = std::min(min_ess, d.ess);
    if (d.rhat) {
      max_rhat = std::max(max_rhat, *d.rhat);
      if (*d.rhat > 1.1) warnings.push_back(d.name + ": split R-hat " + io::fmt(*d.rhat) + " > 1.1");
    }
  }
  if (draws.chains < 2) warnings.push_back("single chain: R-hat not available");
  if (draws.chains >= 2) rep["max_rhat"] = max_rhat;
  rep["min_ess"] = min_ess;
  rep["warnings"] = warnings;
  io::write_file((out / "fit.json").string(), rep.dump(2) + "\n");
  for (const auto& w : warnings) std::cerr << "warning: " << w.get<std::string>() << '\n';
  std::cout << "fit: spec=" << cfg.spec.name() << " draws=" << draws.size();
  if (draws.chains >= 2) std::cout << " max_rhat=" << io::fmt(max_rhat);
  std::cout << " min_ess=" << io::fmt(min_ess) << '\n';
  finish_run(common, "fit", cfg.to_json(), cfg.seed, {"draws.csv", "diagnostics.csv", "fit.json"});
  return 0;
}

// ------------------------------------------------------- reward / optimize

struct RewardConfig {
  /// Exactly one source: posterior draws file, or fixed parameters.
  std::string draws;
  bool truth = false;
  std::optional<JointParams> params;
  std::string profile = "patient1";
  std::optional<History> history;
  /// Empty means the optimal regime.
  std::vector<int> regime;
  std::vector<double> future_times = {2.0, 3.0};
  std::vector<double> gamma;
  int max_treatments = -1;
  int rollouts = 10000;
  int max_draws = 100;
  RewardOptions reward;
  std::uint64_t seed = 1;

  [[nodiscard]] ordered_json to_json(bool with_regime) const {
    ordered_json j;
    if (!draws.empty()) j["draws"] = draws;
    if (truth) j["truth"] = true;
    if (params) j["params"] = io::to_json(*params);
    if (history) {
      j["history"] = io::to_json(*history);
    } else {
      j["profile"] = profile;
    }
    if (with_regime) j["regime"] = regime.empty() ? ordered_json("optimal") : ordered_json(regime);
    j["future_times"] = future_times;
    j["gamma"] = gamma.empty() ? std::vector<double>(future_times.size(), 1.0) : gamma;
    if (max_treatments >= 0) j["max_treatments"] = max_treatments;
    j["rollouts"] = rollouts;
    if (!draws.empty()) j["max_draws"] = max_draws;
    j["reward"] = io::to_json(reward);
    j["seed"] = seed;
    return j;
  }

  static RewardConfig from_json(const ordered_json& j, const std::string& command, bool with_regime) {
    RewardConfig c;
    io::Fields f(j, command);
    f.get("draws", c.draws);
    f.get("truth", c.truth);
    if (const auto* v = f.raw("params")) c.params = io::params_from_json(*v);
    f.get("profile", c.profile);
    if (const auto* v = f.raw("history")) c.history = io::history_from_json(*v);
    if (with_regime) {
      if (const auto* v = f.raw("regime")) {
        if (v->is_string() && v->get<std::string>() == "optimal") {
          c.regime.clear();
        } else if (v->is_array()) {
          for (const auto& e : *v) {
            if (!e.is_number_integer()) f.fail("regime", "expected \"optimal\" or an array of 0/1");
            c.regime.push_back(e.get<int>());
          }
        } else {
          f.fail("regime", "expected \"optimal\" or an array of 0/1");
        }
      }
    }
    f.get("future_times", c.future_times);
    f.get("gamma", c.gamma);
    f.get("max_treatments", c.max_treatments);
    f.get("rollouts", c.rollouts);
    f.get("max_draws", c.max_draws);
    if (const auto* v = f.raw("reward")) c.reward = io::reward_options_from_json(*v, c.reward, command + ".reward");
    f.get("seed", c.seed);
    f.finish();
    return c;
  }
};

struct RewardFlags {
  std::optional<std::string> draws, profile, history, regime, times, gamma, params;
  bool truth = false;
  std::optional<int> rollouts, max_draws, max_treatments;
  bool mean_mark = false;
};

struct RewardSetup {
  RewardConfig cfg;
  History h;
  Regime regime;
  std::vector<JointParams> draws;
  bool posterior = false;
};

RewardSetup setup_reward(const Common& common, const RewardFlags& flags, const std::string& command,
                         bool with_regime) {
  RewardSetup s;
  try {
    auto& c = s.cfg;
    c = RewardConfig::from_json(load_config(common), command, with_regime);
    if (flags.draws) c.draws = *flags.draws;
    if (flags.truth) c.truth = true;
    if (flags.params) c.params = io::params_from_json(ordered_json::parse(io::read_file(*flags.params)));
    if (flags.profile) {
      c.profile = *flags.profile;
      c.history.reset();
    }
    if (flags.history) c.history = io::history_from_json(ordered_json::parse(io::read_file(*flags.history)));
    if (flags.regime) {
      c.regime.clear();
      if (*flags.regime != "optimal")
        for (double v : parse_number_list(*flags.regime, "--regime")) c.regime.push_back(static_cast<int>(v));
    }
    if (flags.times) c.future_times = parse_number_list(*flags.times, "--times");
    if (flags.gamma) c.gamma = parse_number_list(*flags.gamma, "--gamma");
    if (flags.rollouts) c.rollouts = *flags.rollouts;
    if (flags.max_draws) c.max_draws = *flags.max_draws;
    if (flags.max_treatments) c.max_treatments = *flags.max_treatments;
    if (flags.mean_mark) c.reward.mean_mark = true;
    if (common.seed) c.seed = *common.seed;

    const int sources = (!c.draws.empty()) + (c.truth ? 1 : 0) + (c.params ? 1 : 0);
    if (sources != 1) throw InvalidInput(command + ": give exactly one of --draws, --truth or --params");
    if (c.rollouts < 1) throw InvalidInput(command + ": rollouts must be >= 1");
    if (c.max_draws < 0) throw InvalidInput(command + ": max_draws must be >= 0");
    c.reward.validate();

    if (c.history) {
      s.h = *c.history;
    } else if (c.profile == "patient1" || c.profile == "patient2") {
      s.h = patient_profile(c.profile == "patient1" ? 1 : 2);
    } else {
      throw InvalidInput(command + ": unknown profile '" + c.profile + "' (patient1, patient2)");
    }
    FeasibleSet fs;
    if (c.max_treatments >= 0) fs.policy = CapTotal{c.max_treatments};
    if (c.regime.empty()) {
      s.regime = Regime::optimal(c.future_times, c.gamma, fs);
    } else {
      s.regime = Regime::fixed(c.regime, c.future_times, c.gamma);
      s.regime.feasible = fs;
    }
    s.regime.validate(s.h);
    if (!c.draws.empty()) {
      s.draws = parse_draws_csv(io::read_file(c.draws)).params;
      if (s.draws.empty()) throw InvalidInput(command + ": no draws in '" + c.draws + "'");
      s.posterior = true;
    } else {
      const JointParams p = c.params ? *c.params : JointParams::simulation_truth();
      SimFamily check(p);
      s.draws = {p};
    }
    prepare_out(common);
  } catch (const InvalidInput&) {
    throw;
  } catch (const std::exception& e) {
    throw InvalidInput(e.what());
  }
  return s;
}

ordered_json evaluate(const Common& common, const RewardSetup& s, std::optional<int>& first_action, double& value,
                      double& se) {
  const Stream rng(s.cfg.seed, {static_cast<std::uint64_t>(Tag::rollout)});
  ordered_json result;
  if (s.posterior) {
    const auto pr = posterior_reward(s.h, s.regime, s.draws, s.cfg.rollouts, rng, s.cfg.reward, s.cfg.max_draws,
                                     common.threads);
    result = io::to_json(pr, s.regime.is_optimal());
    value = pr.mean;
    se = pr.sd / std::sqrt(static_cast<double>(pr.per_draw.size()));
    if (s.regime.is_optimal()) first_action = pr.recommended_first_action;
  } else {
    const SimFamily fam(s.draws.front());
    if (s.regime.is_optimal()) {
      const auto [plan, e] = reward_optimal(s.h, s.regime, fam, s.cfg.rollouts, rng, s.cfg.reward);
      result = io::to_json(e);
      result["plan"] = io::to_json(plan);
      first_action = plan.first_action;
      value = e.value;
      se = e.batch_std_error;
    } else {
      const auto e = reward_fixed(s.h, s.regime, fam, s.cfg.rollouts, rng, s.cfg.reward);
      result = io::to_json(e);
      value = e.value;
      se = e.batch_std_error;
    }
  }
  return result;
}

int run_reward(const Common& common, const RewardFlags& flags, const std::string& command) {
  const bool optimize = command == "optimize";
  const auto s = setup_reward(common, flags, command, !optimize);
  log(common, command + ": " + std::to_string(s.draws.size()) + " parameter set(s), R=" +
                  std::to_string(s.cfg.rollouts));
  std::optional<int> first;
  double value = 0.0, se = 0.0;
  ordered_json out;
  out["mode"] = s.posterior ? "posterior" : "fixed_parameters";
  out["regime"] = s.regime.is_optimal() ? ordered_json("optimal") : ordered_json(s.cfg.regime);
  out["history"] = io::to_json(s.h);
  out["result"] = evaluate(common, s, first, value, se);
  io::write_file((fs::path(common.out) / (command + ".json")).string(), out.dump(2) + "\n");
  std::cout << command << ": value=" << io::fmt(value) << " se=" << io::fmt(se);
  if (first) std::cout << " first_action=" << *first;
  std::cout << '\n';
  if (optimize) {
    const auto& courses = s.posterior ? out["result"]["courses"] : out["result"]["plan"]["courses"];
    for (const auto& c : courses) {
      std::cout << "  course";
      for (int a : c["course"]) std::cout << ' ' << a;
      std::cout << "  frequency=" << io::fmt(c["frequency"].get<double>()) << '\n';
    }
  }
  finish_run(common, command, s.cfg.to_json(!optimize), s.cfg.seed, {command + ".json"});
  return 0;
}

// ------------------------------------------------------------------- study

struct StudyFlags {
  std::optional<int> replications, n_train, n_test;
  std::optional<std::string> scenario, specs;
};

int run_study_command(const Common& common, const StudyFlags& flags) {
  StudyConfig cfg;
  try {
    cfg = io::study_config_from_json(load_config(common));
    if (flags.replications) cfg.replications = *flags.replications;
    if (flags.n_train) cfg.n_train = *flags.n_train;
    if (flags.n_test) cfg.n_test = *flags.n_test;
    if (flags.scenario) cfg.scenario = parse_scenario(*flags.scenario);
    if (flags.specs) {
      cfg.specs.clear();
      for (auto f : io::split(*flags.specs)) cfg.specs.push_back(ModelSpec::parse(f));
    }
    if (common.seed) cfg.seed = *common.seed;
    cfg.threads = common.threads;
    cfg.validate();
    prepare_out(common);
  } catch (const std::exception& e) {
    throw InvalidInput(e.what());
  }
  const auto report = run_study(cfg, [&](const std::string& m) { log(common, m); });
  auto files = io::export_report(report, common.out);
  for (const auto& f : report.failures) std::cerr << "failure: " << f << '\n';
  std::cout << "study: replications=" << cfg.replications << " specs=" << cfg.specs.size()
            << " failures=" << report.failures.size() << '\n';
  for (const auto& row : report.summary)
    std::cout << "  " << row.spec << ' ' << row.profile << ' ' << row.regime << " bias=" << io::fmt(row.bias)
              << (row.agreement_rate ? " ar=" + io::fmt(*row.agreement_rate) : std::string()) << '\n';
  finish_run(common, "study", io::to_json(cfg), cfg.seed, files);
  return report.failures.empty() ? 0 : kRuntime;
}

// ---------------------------------------------------------------- mc-error

struct McErrorConfig {
  std::string input;
  bool synthetic = false;
  int S = 50, B = 50, R = 50;
  double var_replication = 1.0, var_draw = 0.25, var_rollout = 0.04;
  bool moment_matched = false;
  std::uint64_t seed = 1;

  [[nodiscard]] ordered_json to_json() const {
    ordered_json j;
    if (synthetic) {
      j["synthetic"] = {{"S", S},
                        {"B", B},
                        {"R", R},
                        {"var_replication", var_replication},
                        {"var_draw", var_draw},
                        {"var_rollout", var_rollout},
                        {"moment_matched", moment_matched}};
      j["seed"] = seed;
    } else {
      j["input"] = input;
    }
    return j;
  }

  static McErrorConfig from_json(const ordered_json& j) {
    McErrorConfig c;
    io::Fields f(j, "mc-error");
    f.get("input", c.input);
    if (const auto* v = f.raw("synthetic")) {
      c.synthetic = true;
      io::Fields g(*v, "mc-error.synthetic");
      g.get("S", c.S);
      g.get("B", c.B);
      g.get("R", c.R);
      g.get("var_replication", c.var_replication);
      g.get("var_draw", c.var_draw);
      g.get("var_rollout", c.var_rollout);
      g.get("moment_matched", c.moment_matched);
      g.finish();
    }
    f.get("seed", c.seed);
    f.finish();
    return c;
  }
};

struct McErrorFlags {
  std::optional<std::string> input;
  bool synthetic = false;
  bool moment_matched = false;
  std::optional<int> S, B, R;
};

int run_mc_error(const Common& common, const McErrorFlags& flags) {
  McErrorConfig cfg;
  NestedSamples x;
  try {
    cfg = McErrorConfig::from_json(load_config(common));
    if (flags.input) {
      cfg.input = *flags.input;
      cfg.synthetic = false;
    }
    if (flags.synthetic) cfg.synthetic = true;
    if (flags.moment_matched) cfg.moment_matched = true;
    if (flags.S) cfg.S = *flags.S;
    if (flags.B) cfg.B = *flags.B;
    if (flags.R) cfg.R = *flags.R;
    if (common.seed) cfg.seed = *common.seed;
    if (cfg.synthetic == !cfg.input.empty()) throw InvalidInput("mc-error: give exactly one of --input or --synthetic");
    if (cfg.synthetic) {
      if (cfg.var_replication < 0 || cfg.var_draw < 0 || cfg.var_rollout < 0)
        throw InvalidInput("mc-error: variances must be non-negative");
      x = synthetic_nested(cfg.S, cfg.B, cfg.R, cfg.var_replication, cfg.var_draw, cfg.var_rollout,
                           Stream(cfg.seed), cfg.moment_matched);
    } else {
      x = parse_nested_csv(io::read_file(cfg.input));
    }
    prepare_out(common);
  } catch (const InvalidInput&) {
    throw;
  } catch (const std::exception& e) {
    throw InvalidInput(e.what());
  }
  VarianceComponents c;
  try {
    c = mc_error(x);
  } catch (const ModelError& e) {
    throw InvalidInput(e.what());
  }
  std::vector<std::string> outputs;
  if (cfg.synthetic) {
    io::write_file((fs::path(common.out) / "nested.csv").string(), nested_csv(x));
    outputs.push_back("nested.csv");
  }
  ordered_json out;
  out["S"] = x.S;
  out["B"] = x.B;
  out["R"] = x.R;
  out["components"] = io::to_json(c);
  io::write_file((fs::path(common.out) / "mc_error.json").string(), out.dump(2) + "\n");
  outputs.push_back("mc_error.json");
  std::cout << "mc-error: S=" << x.S << " B=" << x.B << " R=" << x.R;
  if (c.between_replication) std::cout << " var_replication=" << io::fmt(*c.between_replication);
  std::cout << " var_draw=" << io::fmt(c.between_draw) << " var_rollout=" << io::fmt(c.within_rollout)
            << " std_error=" << io::fmt(c.std_error()) << '\n';
  finish_run(common, "mc-error", cfg.to_json(), cfg.seed, outputs);
  return 0;
}

std::string version_string() {
  std::ostringstream s;
  s << "dtrjm " << DTRJM_VERSION << " (C++ " << __cplusplus << ", "
#if defined(__clang__)
    << "clang " << __clang_major__ << '.' << __clang_minor__
#elif defined(__GNUC__)
    << "gcc " << __GNUC__ << '.' << __GNUC_MINOR__
#else
    << "unknown compiler"
#endif
#ifdef NDEBUG
    << ", release"
#else
    << ", debug"
#endif
    << ", Eigen " << EIGEN_WORLD_VERSION << '.' << EIGEN_MAJOR_VERSION << '.' << EIGEN_MINOR_VERSION << ")";
  return s.str();
}

void add_common(CLI::App* sub, Common& c, std::optional<std::uint64_t>& seed) {
  sub->add_option("--config", c.config, "JSON configuration file")->check(CLI::ExistingFile);
  sub->add_option("--seed", seed, "master seed (overrides the config)");
  sub->add_option("--out", c.out, "output directory")->capture_default_str();
  sub->add_option("--threads", c.threads, "worker threads")->check(CLI::PositiveNumber)->capture_default_str();
  sub->add_flag("-v,--verbose", c.verbose, "progress messages on stderr");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint models for irregularly observed treatment data and dynamic treatment regimes", "dtrjm"};
  app.set_version_flag("--version", version_string());
  app.require_subcommand(1);

  Common common;
  std::optional<std::uint64_t> seed;

  SimulateFlags sim;
  auto* s_sim = app.add_subcommand("simulate", "simulate an observational dataset");
  add_common(s_sim, common, seed);
  s_sim->add_option("--n", sim.n, "number of individuals");
  s_sim->add_option("--scenario", sim.scenario, "full, WA_indep_T, WT_indep_A or independent");

  FitFlags fit;
  auto* s_fit = app.add_subcommand("fit", "fit a joint model by MCMC");
  add_common(s_fit, common, seed);
  s_fit->add_option("--data", fit.data, "dataset CSV");
  s_fit->add_option("--spec", fit.spec, "model specification: Y, YA, YT or YAT");
  s_fit->add_option("--chains", fit.chains);
  s_fit->add_option("--iterations", fit.iterations);
  s_fit->add_option("--burn-in", fit.burn_in);
  s_fit->add_option("--thin", fit.thin);

  RewardFlags rew, opt;
  const auto reward_options = [&](CLI::App* sub, RewardFlags& f, bool with_regime) {
    add_common(sub, common, seed);
    sub->add_option("--draws", f.draws, "posterior draws CSV from fit");
    sub->add_flag("--truth", f.truth, "use the data-generating parameters");
    sub->add_option("--params", f.params, "JSON file with fixed parameters");
    sub->add_option("--profile", f.profile, "patient1 or patient2");
    sub->add_option("--history", f.history, "JSON file with a conditioning history");
    if (with_regime) sub->add_option("--regime", f.regime, "optimal, or fixed actions such as 0,1");
    sub->add_option("--times", f.times, "future visit times, e.g. 2,3");
    sub->add_option("--gamma", f.gamma, "reward weights, e.g. 1,1");
    sub->add_option("--rollouts", f.rollouts, "Monte Carlo rollouts per parameter set");
    sub->add_option("--max-draws", f.max_draws, "posterior draws used (0 = all)");
    sub->add_option("--max-treatments", f.max_treatments, "cap on total treatments");
    sub->add_flag("--mean-mark", f.mean_mark, "extend histories with the mean simulated mark");
  };
  auto* s_rew = app.add_subcommand("reward", "reward of a fixed or optimal regime");
  reward_options(s_rew, rew, true);
  auto* s_opt = app.add_subcommand("optimize", "optimal regime by backwards induction");
  reward_options(s_opt, opt, false);

  StudyFlags st;
  auto* s_study = app.add_subcommand("study", "replicated simulation study");
  add_common(s_study, common, seed);
  s_study->add_option("--replications", st.replications);
  s_study->add_option("--n-train", st.n_train);
  s_study->add_option("--n-test", st.n_test);
  s_study->add_option("--scenario", st.scenario);
  s_study->add_option("--specs", st.specs, "comma-separated, e.g. YAT,Y");

  McErrorFlags mc;
  auto* s_mc = app.add_subcommand("mc-error", "nested Monte Carlo error decomposition");
  add_common(s_mc, common, seed);
  s_mc->add_option("--input", mc.input, "CSV with columns s,b,r,value");
  s_mc->add_flag("--synthetic", mc.synthetic, "generate the hierarchical Gaussian fixture");
  s_mc->add_flag("--moment-matched", mc.moment_matched, "match fixture moments exactly");
  s_mc->add_option("--S", mc.S);
  s_mc->add_option("--B", mc.B);
  s_mc->add_option("--R", mc.R);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kInvalid;
  }
  common.seed = seed;

  try {
    if (s_sim->parsed()) return run_simulate(common, sim);
    if (s_fit->parsed()) return run_fit(common, fit);
    if (s_rew->parsed()) return run_reward(common, rew, "reward");
    if (s_opt->parsed()) return run_reward(common, opt, "optimize");
    if (s_study->parsed()) return run_study_command(common, st);
    if (s_mc->parsed()) return run_mc_error(common, mc);
  } catch (const InvalidInput& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInvalid;
  } catch (const std::exception& e) {
    std::cerr << "runtime failure: " << e.what() << '\n';
    return kRuntime;
  }
  return kInvalid;
}
