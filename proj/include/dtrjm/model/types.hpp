#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace dtrjm {

struct ModelError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Process { Y, X, A, T };

/// Index of each frailty coordinate in the 3-vector (and in Sigma).
enum RandomEffectIndex : int { kReT = 0, kReW = 1, kReA = 2 };

/// One individual's irregularly observed trajectory. Visit j (1-based) has
/// time t_j, outcome y_j and covariate x_j; treatment a_j is assigned after
/// w_j is observed and applies from visit j+1 onward (a_0 = 0).
struct PatientPath {
  std::vector<double> visit_times;
  std::vector<int> outcomes;
  std::vector<double> covariates;
  std::vector<int> treatments;
  double censor_time = 0.0;

  [[nodiscard]] int n_visits() const { return static_cast<int>(visit_times.size()); }

  void validate() const {
    const auto m = visit_times.size();
    if (m < 1) throw ModelError("PatientPath: at least one visit required");
    if (outcomes.size() != m || covariates.size() != m)
      throw ModelError("PatientPath: outcomes/covariates length must equal n_visits");
    if (treatments.size() != m && treatments.size() + 1 != m)
      throw ModelError("PatientPath: treatments length must be n_visits or n_visits - 1");
    if (visit_times[0] < 0.0) throw ModelError("PatientPath: first visit time negative");
    for (std::size_t j = 1; j < m; ++j)
      if (!(visit_times[j] > visit_times[j - 1])) throw ModelError("PatientPath: visit times not increasing");
    if (!(censor_time > visit_times.back())) throw ModelError("PatientPath: censor time must exceed last visit");
    for (int y : outcomes)
      if (y != 0 && y != 1) throw ModelError("PatientPath: outcome not binary");
    for (int a : treatments)
      if (a != 0 && a != 1) throw ModelError("PatientPath: treatment not binary");
  }
};

/// Conditioning history h_k for reward evaluation: k visits and the k-1
/// treatments assigned so far. Outcomes are stored as reals so that a
/// history can carry an averaged (fractional) simulated mark.
struct History {
  std::vector<double> visit_times;
  std::vector<double> outcomes;
  std::vector<double> covariates;
  std::vector<int> treatments;

  [[nodiscard]] int stage() const { return static_cast<int>(visit_times.size()); }

  [[nodiscard]] int prior_treatments() const {
    int n = 0;
    for (int a : treatments) n += a;
    return n;
  }

  void validate() const {
    const auto k = visit_times.size();
    if (outcomes.size() != k || covariates.size() != k) throw ModelError("History: ragged marks");
    if (k > 0 && treatments.size() + 1 != k) throw ModelError("History: need k-1 treatments for k visits");
    if (k == 0 && !treatments.empty()) throw ModelError("History: treatments without visits");
    for (std::size_t j = 1; j < k; ++j)
      if (!(visit_times[j] > visit_times[j - 1])) throw ModelError("History: visit times not increasing");
  }

  /// Prefix of a full path up to visit k.
  static History from_path(const PatientPath& p, int k) {
    if (k < 0 || k > p.n_visits()) throw ModelError("History: stage beyond path length");
    History h;
    for (int j = 0; j < k; ++j) {
      h.visit_times.push_back(p.visit_times[j]);
      h.outcomes.push_back(p.outcomes[j]);
      h.covariates.push_back(p.covariates[j]);
      if (j + 1 < k) h.treatments.push_back(p.treatments.at(j));
    }
    return h;
  }
};

/// Which processes a joint model includes. Y (with X) is always present.
struct ModelSpec {
  bool treatment = true;
  bool visits = true;

  static ModelSpec full() { return {true, true}; }
  static ModelSpec outcome_only() { return {false, false}; }

  /// Active frailty coordinates in (T, W, A) order.
  [[nodiscard]] std::vector<int> active_effects() const {
    std::vector<int> idx;
    if (visits) idx.push_back(kReT);
    idx.push_back(kReW);
    if (treatment) idx.push_back(kReA);
    return idx;
  }

  [[nodiscard]] std::string name() const {
    std::string s = "Y";
    if (treatment) s += "A";
    if (visits) s += "T";
    return s;
  }

  static ModelSpec parse(std::string_view s) {
    if (s == "Y") return {false, false};
    if (s == "YA") return {true, false};
    if (s == "YT") return {false, true};
    if (s == "YAT") return {true, true};
    throw ModelError("unknown model spec '" + std::string(s) + "' (expected Y, YA, YT or YAT)");
  }

  bool operator==(const ModelSpec&) const = default;
};

/// All parameters of the joint model. mu and tau2 belong to the
/// dose-response family and are unused by the simulation-study family.
struct JointParams {
  Eigen::VectorXd phi_Y = Eigen::VectorXd::Zero(6);
  Eigen::VectorXd phi_X = Eigen::VectorXd::Zero(2);
  double tau_X2 = 1.0;
  Eigen::VectorXd phi_A = Eigen::VectorXd::Zero(4);
  Eigen::VectorXd phi_T = Eigen::VectorXd::Zero(2);
  double lambda = 1.0;
  double alpha = 1.0;
  Eigen::Matrix3d Sigma = Eigen::Matrix3d::Identity();
  double mu = 0.0;
  double tau2 = 1.0;

  /// Data-generating values of the simulation study. The lagged-treatment
  /// coefficient of the treatment model is not given there and is set to 0.
  static JointParams simulation_truth() {
    JointParams p;
    p.phi_T << -0.3, 0.5;
    p.lambda = 0.2;
    p.alpha = 3.5;
    p.phi_Y << -0.3, 0.3, 0.3, 0.55, -0.5, -0.5;
    p.phi_A << 0.2, -0.2, 0.2, 0.0;
    p.phi_X << 0.4, 0.4;
    p.tau_X2 = 0.3;
    p.Sigma.setConstant(0.216);
    p.Sigma.diagonal().setConstant(0.36);
    return p;
  }

  [[nodiscard]] double sigma_W2() const { return Sigma(kReW, kReW); }

  /// Checks positivity constraints and that Sigma restricted to `active`
  /// is symmetric positive definite. A zero Sigma is accepted when
  /// `allow_degenerate` is set (deterministic frailties).
  void validate(const std::vector<int>& active = {0, 1, 2}, bool allow_degenerate = false) const {
    if (phi_Y.size() != 6 || phi_X.size() != 2 || phi_A.size() != 4 || phi_T.size() != 2)
      throw ModelError("JointParams: coefficient dimension mismatch");
    if (!(tau_X2 > 0.0) || !(lambda > 0.0) || !(alpha > 0.0) || !(tau2 > 0.0))
      throw ModelError("JointParams: variance/scale/shape parameters must be positive");
    const auto n = static_cast<Eigen::Index>(active.size());
    Eigen::MatrixXd S(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) S(i, j) = Sigma(active[i], active[j]);
    if (!S.isApprox(S.transpose(), 1e-12) && (S - S.transpose()).norm() > 1e-12)
      throw ModelError("JointParams: Sigma not symmetric");
    if (allow_degenerate && S.isZero(0.0)) return;
    Eigen::LLT<Eigen::MatrixXd> llt(S);
    if (llt.info() != Eigen::Success) throw ModelError("JointParams: Sigma not positive definite");
  }
};

/// Per-individual frailty triple; the visit frailty is exp(u_T_log).
struct RandomEffects {
  double u_T_log = 0.0;
  double u_W = 0.0;
  double u_A = 0.0;

  [[nodiscard]] Eigen::Vector3d as_vector() const { return {u_T_log, u_W, u_A}; }
  static RandomEffects from_vector(const Eigen::Vector3d& v) { return {v[0], v[1], v[2]}; }
};

struct Unrestricted {};
struct CapTotal {
  int max_treatments = 0;
};

/// Treatments permitted at a stage given the history so far.
struct FeasibleSet {
  std::variant<Unrestricted, CapTotal> policy = Unrestricted{};

  /// Options at the next decision given `prior_treatments` already given.
  [[nodiscard]] std::vector<int> options(int prior_treatments) const {
    if (const auto* cap = std::get_if<CapTotal>(&policy)) {
      if (prior_treatments >= cap->max_treatments) return {0};
    }
    return {0, 1};
  }

  [[nodiscard]] bool allows(int prior_treatments, int a) const {
    for (int o : options(prior_treatments))
      if (o == a) return true;
    return false;
  }
};

struct FixedRegime {
  std::vector<int> treatments;
};
struct OptimalRegime {};

/// Treatment regime over future visits t_{k+1}..t_{K+1} with reward
/// weights gamma_{k+1}..gamma_{K+1}. The number of decisions equals the
/// number of future times (decisions a_k..a_K).
struct Regime {
  std::variant<FixedRegime, OptimalRegime> kind = OptimalRegime{};
  std::vector<double> future_times;
  std::vector<double> gamma;
  FeasibleSet feasible;

  [[nodiscard]] bool is_optimal() const { return std::holds_alternative<OptimalRegime>(kind); }
  [[nodiscard]] int stages() const { return static_cast<int>(future_times.size()); }

  static Regime fixed(std::vector<int> a, std::vector<double> times, std::vector<double> gamma = {}) {
    Regime r;
    r.kind = FixedRegime{std::move(a)};
    r.gamma = gamma.empty() ? std::vector<double>(times.size(), 1.0) : std::move(gamma);
    r.future_times = std::move(times);
    return r;
  }

  static Regime optimal(std::vector<double> times, std::vector<double> gamma = {}, FeasibleSet fs = {}) {
    Regime r;
    r.kind = OptimalRegime{};
    r.gamma = gamma.empty() ? std::vector<double>(times.size(), 1.0) : std::move(gamma);
    r.future_times = std::move(times);
    r.feasible = fs;
    return r;
  }

  void validate(const History& h) const {
    if (future_times.empty()) throw ModelError("Regime: no future times");
    if (gamma.size() != future_times.size()) throw ModelError("Regime: gamma length must match future times");
    for (double g : gamma)
      if (!(g >= 0.0)) throw ModelError("Regime: negative reward weight");
    double last = h.stage() > 0 ? h.visit_times.back() : -std::numeric_limits<double>::infinity();
    for (double t : future_times) {
      if (!(t > last)) throw ModelError("Regime: future times must increase past the history");
      last = t;
    }
    if (const auto* f = std::get_if<FixedRegime>(&kind)) {
      if (static_cast<int>(f->treatments.size()) != stages())
        throw ModelError("Regime: fixed treatment vector length must equal number of stages");
      int given = h.prior_treatments();
      for (int a : f->treatments) {
        if (!feasible.allows(given, a)) throw ModelError("Regime: fixed treatment outside feasible set");
        given += a;
      }
    }
  }
};

}  // namespace dtrjm
