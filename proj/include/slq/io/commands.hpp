#pragma once

// Command workflows behind the `slq` executable. Each command returns a
// report and an exit code: 0 when every check passes, 1 when a check fails,
// 2 for configuration or shape errors, 3 for numerical or capacity errors.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "slq/adapted.hpp"
#include "slq/backward.hpp"
#include "slq/error.hpp"
#include "slq/forward.hpp"
#include "slq/galerkin.hpp"
#include "slq/game.hpp"
#include "slq/io/config.hpp"
#include "slq/io/oracle.hpp"
#include "slq/io/report.hpp"
#include "slq/lq_core.hpp"
#include "slq/monte_carlo.hpp"
#include "slq/random.hpp"
#include "slq/tree.hpp"

namespace slq::io {

inline const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"validate",       "solve", "gradient-check", "duality-check",
                                              "nash",           "oracle-compare", "convergence"};
  return names;
}

struct RunOptions {
  std::optional<std::uint64_t> seed;  // overrides random.seed and backend.seed
};

struct CommandOutcome {
  ResultReport report;
  int exit_code = 0;
};

inline constexpr double exact_tolerance = 1e-12;
inline constexpr double expansion_tolerance = 1e-11;
inline constexpr double cost_form_tolerance = 1e-10;
inline constexpr double stationarity_tolerance = 1e-8;
inline constexpr double approximate_tolerance = 5e-2;

namespace detail {

inline double relative_gap(double a, double b) {
  const double scale = std::max(std::abs(a), std::abs(b));
  return scale > 0.0 ? std::abs(a - b) / scale : 0.0;
}

inline ordered_json to_json(const Vector& v) {
  ordered_json out = ordered_json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

template <FilteredSpace Space>
std::string backend_label(const Space&) {
  if constexpr (std::is_same_v<Space, TreeSpace>) {
    return "tree";
  } else if constexpr (std::is_same_v<Space, DeterministicSpace>) {
    return "tree (noise-free, collapsed to one path)";
  } else {
    return "mc";
  }
}

/// Calls f(problem) with the configured backend on a K-step grid. Noise-free
/// tree problems run on the single-path space, where every tree quantity is
/// reproduced exactly.
template <class F>
void with_problem(const ProblemConfig& c, int K, F&& f) {
  if (c.backend.type == "mc") {
    auto space = std::make_shared<const MonteCarloSpace>(make_grid(K, c.t0, c.T), c.backend.mc);
    f(build_problem(c, space));
    return;
  }
  if (K > TreeSpace::max_steps) {
    // Only a noise-free problem can run without the full tree.
    auto det = std::make_shared<const DeterministicSpace>(make_grid(K, c.t0, c.T));
    auto p = build_problem(c, det);
    if (!is_noise_free(p)) {
      throw Error(ErrorCode::capacity, "grid.K=" + std::to_string(K) + " exceeds the tree limit of " +
                                           std::to_string(TreeSpace::max_steps) + " levels");
    }
    f(p);
    return;
  }
  auto space = std::make_shared<const TreeSpace>(build_tree(K, c.t0, c.T));
  auto p = build_problem(c, space);
  if (is_noise_free(p)) {
    f(collapse(p));
  } else {
    f(p);
  }
}

template <class F>
void with_game(const ProblemConfig& c, F&& f) {
  if (c.backend.type == "mc") {
    auto space = std::make_shared<const MonteCarloSpace>(make_grid(c.K, c.t0, c.T), c.backend.mc);
    f(build_game(c, space));
  } else {
    auto space = std::make_shared<const TreeSpace>(build_tree(c.K, c.t0, c.T));
    f(build_game(c, space));
  }
}

inline ordered_json validation_json(const ValidationReport& v) {
  ordered_json out = ordered_json::object();
  out["symmetric"] = v.symmetric();
  out["symmetry_violations"] = v.symmetry_violations;
  out["max_skew"] = v.max_skew;
  out["standard"] = v.standard;
  out["delta"] = v.delta;
  out["min_eig_Q"] = v.min_eig_Q;
  out["min_eig_G"] = v.min_eig_G;
  out["S_zero"] = v.s_zero;
  if (!v.s_zero) out["min_eig_joint"] = v.min_eig_joint;
  return out;
}

inline FinitenessOptions finiteness_options(const ProblemConfig& c) {
  FinitenessOptions o;
  o.dense_threshold = c.solver.dense_threshold;
  o.allow_iterative = c.solver.allow_iterative;
  return o;
}

inline SolveOptions solve_options(const ProblemConfig& c) {
  SolveOptions o;
  o.tolerance = c.solver.tolerance;
  o.max_iter_factor = c.solver.max_iter_factor;
  o.least_squares = c.solver.least_squares;
  return o;
}

template <FilteredSpace Space>
ordered_json finiteness_json(const LQProblem<Space>& p, const ProblemConfig& c) {
  ordered_json out = ordered_json::object();
  try {
    const FinitenessReport f = check_finiteness(p, finiteness_options(c));
    out["nonneg"] = f.nonneg;
    out["min_eig"] = f.min_eig;
    out["max_eig"] = f.max_eig;
    out["dim"] = f.dim;
    out["method"] = f.method;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::capacity) throw;
    out["skipped"] = e.what();
  }
  return out;
}

/// sum_k dt <a_k, b_k> along each path of an ensemble.
inline std::vector<double> per_path(const MonteCarloSpace& s, const Process& a, const Process& b) {
  std::vector<double> out(s.level_size(0), 0.0);
  const double dt = s.grid().dt();
  for (int k = a.first_level(); k <= a.last_level(); ++k) {
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += dt * a(k, j).dot(b(k, j));
  }
  return out;
}

inline std::vector<double> per_path(const LevelValues<Vector>& a, const LevelValues<Vector>& b, std::size_t paths) {
  std::vector<double> out(paths);
  for (std::size_t j = 0; j < paths; ++j) out[j] = a[a.size() == 1 ? 0 : j].dot(b[b.size() == 1 ? 0 : j]);
  return out;
}

/// Mean and three-sigma bound of a per-path discrepancy.
struct StatisticalResidual {
  double mean = 0.0;
  double bound = 0.0;
  bool within() const { return std::abs(mean) <= bound + 1e-14; }
};

inline StatisticalResidual statistical(const std::vector<double>& d) {
  const double M = static_cast<double>(d.size());
  double mean = 0.0;
  for (double v : d) mean += v / M;
  double var = 0.0;
  for (double v : d) var += (v - mean) * (v - mean) / (M - 1.0);
  return {mean, 3.0 * std::sqrt(var / M)};
}

inline std::vector<double> minus(std::vector<double> a, const std::vector<double>& b) {
  for (std::size_t j = 0; j < a.size(); ++j) a[j] -= b[j];
  return a;
}

inline std::uint64_t check_seed(const ProblemConfig& c) { return c.random.enabled ? c.random.seed + 1 : 42; }

// ---------------------------------------------------------------------------

template <FilteredSpace Space>
void validate_slq(const LQProblem<Space>& p, const ProblemConfig& c, ResultReport& r) {
  r.body["backend"] = backend_label(*p.space);
  r.body["validation"] = validation_json(validate_conditions(p));
  r.body["finiteness"] = finiteness_json(p, c);
}

template <FilteredSpace Space>
void validate_game(const GameSpec<Space>& g, const ProblemConfig& c, ResultReport& r) {
  r.body["backend"] = backend_label(*g.space);
  r.body["symmetry_violations"] = game_symmetry_violations(g);
  const ControlProcess zero = filled(*g.space, g.initial_level, g.steps() - 1, Vector(Vector::Zero(g.control_dim)));
  for (int i = 0; i < 2; ++i) {
    const std::string key = "player" + std::to_string(i + 1);
    r.body[key]["validation"] = validation_json(validate_conditions(embed_player_problem(g, i, zero)));
    try {
      const ConvexityReport cv = check_convexity_homogeneous(g, i, finiteness_options(c));
      r.body[key]["convex"] = cv.convex;
      r.body[key]["min_eig"] = cv.min_eig;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::capacity) throw;
      r.body[key]["convexity_skipped"] = e.what();
    }
  }
}

template <FilteredSpace Space>
void solve_slq(const LQProblem<Space>& p, const ProblemConfig& c, ResultReport& r) {
  const Space& s = *p.space;
  const OpenLoopSolution sol = solve_open_loop(p, solve_options(c));
  const SolveDiagnostics& d = sol.diagnostics;
  r.body["backend"] = backend_label(s);
  r.body["mode"] = d.mode;
  r.body["status"] = krylov::to_string(d.status);
  r.body["iterations"] = d.iterations;
  r.body["relative_residual"] = d.relative_residual;
  r.body["gradient_norm"] = d.gradient_norm;
  r.body["cost"] = d.cost;
  r.body["warnings"] = d.warnings;
  r.body["control_norm"] = process_norm(s, sol.u);
  r.body["initial_control"] = to_json(level_mean(s, p.initial_level, sol.u.level(p.initial_level)));
  const StatePath x = solve_forward(p, sol.u);
  r.body["terminal_state_mean"] = to_json(level_mean(s, p.steps(), x.level(p.steps())));
  r.body["terminal_state_second_moment"] = pair_level(s, p.steps(), x.level(p.steps()), x.level(p.steps()));
  Table& t = r.table("control", {"level", "node", "component", "value"});
  for (int k = p.initial_level; k < p.steps(); ++k) {
    for (std::size_t n = 0; n < sol.u.level(k).size(); ++n) {
      for (Eigen::Index i = 0; i < p.control_dim; ++i) {
        t.rows.push_back({static_cast<double>(k), static_cast<double>(n), static_cast<double>(i), sol.u.level(k)[n](i)});
      }
    }
  }
  r.check("converged", d.converged());
  r.check("gradient_norm", d.gradient_norm <= stationarity_tolerance);
}

template <FilteredSpace Space>
void gradient_check(const LQProblem<Space>& p, const ProblemConfig& c, ResultReport& r) {
  const Space& s = *p.space;
  Sampler rng(check_seed(c));
  const ControlProcess u = random_control(p, rng);
  const ControlProcess v = random_control(p, rng);
  const ControlProcess g = frechet_gradient(p, u);
  const double J0 = cost(p, u);
  const double gv = pair_processes(s, g, v);
  const double Jv = homogeneous_cost(p, v);
  const double tol = Space::exact ? expansion_tolerance : approximate_tolerance;
  r.body["backend"] = backend_label(s);
  r.body["tolerance_kind"] = Space::exact ? "exact" : "approximate (regression conditional expectations)";
  r.body["tolerance"] = tol;
  Table& t = r.table("sweep", {"epsilon", "expansion_residual"});
  double worst = 0.0;
  for (double eps : c.checks.epsilons) {
    const double J1 = cost(p, combine(s, 1.0, u, eps, v));
    const double res = J1 - J0 - eps * gv - eps * eps * Jv;
    const double scale = std::abs(J1) + std::abs(J0) + std::abs(eps * gv) + std::abs(eps * eps * Jv);
    const double rel = scale > 0.0 ? std::abs(res) / scale : 0.0;
    worst = std::max(worst, rel);
    t.rows.push_back({eps, rel});
  }
  const double form = relative_gap(J0, cost_psi_form(p, u));
  r.body["max_expansion_residual"] = worst;
  r.body["cost_form_residual"] = form;
  r.check("expansion", worst <= tol);
  r.check("cost_forms", form <= (Space::exact ? cost_form_tolerance : approximate_tolerance));
}

struct DualityRow {
  double transposition = 0.0;
  double M = 0.0;
  double N = 0.0;
  double hatM = 0.0;
  double hatN = 0.0;
  double psi1 = 0.0;
};

template <FilteredSpace Space>
DualityRow duality_instance(const LQProblem<Space>& p, Sampler& rng) {
  const Space& s = *p.space;
  const int first = p.initial_level;
  const int K = p.steps();
  const Eigen::Index Nd = p.state_dim();
  LevelValues<Vector> yT;
  const Process terminal_draw = random_adapted(s, K, K, Nd, rng);
  yT = terminal_draw.level(K);
  const Process xi = random_adapted(s, first, K - 1, Nd, rng);
  TranspositionTest test;
  test.eta = random_adapted(s, first, first, Nd, rng).level(first);
  test.v1 = random_adapted(s, first, K - 1, Nd, rng);
  test.v2 = random_adapted(s, first, K - 1, Nd, rng);
  const ControlProcess u = random_control(p, rng);
  const ControlProcess v = random_control(p, rng);
  const Vector eta = rng.vector(Nd, 1.0);
  const OperatorBundle<Space> ops(p);
  const PsiSystem<Space> psi(p);
  DualityRow row;
  row.transposition = verify_transposition(p, yT, xi, test).relative;
  row.M = relative_gap(pair_processes(s, ops.running(ops.apply_M(u)), xi), pair_processes(s, u, ops.apply_M_star(xi)));
  row.N = relative_gap(pair_processes(s, ops.running(ops.apply_N(eta)), xi), eta.dot(ops.apply_N_star(xi)));
  row.hatM = relative_gap(pair_terminal(s, ops.apply_hatM(u), yT), pair_processes(s, u, ops.apply_hatM_star(yT)));
  row.hatN = relative_gap(pair_terminal(s, ops.apply_hatN(eta), yT), eta.dot(ops.apply_hatN_star(yT)));
  row.psi1 = relative_gap(pair_processes(s, psi.apply_psi1(u), v), pair_processes(s, u, psi.apply_psi1(v)));
  return row;
}

template <FilteredSpace Space>
void duality_check(const LQProblem<Space>& p, const ProblemConfig& c, ResultReport& r) {
  r.body["backend"] = backend_label(*p.space);
  r.body["instances"] = c.checks.instances;
  r.body["tolerance"] = exact_tolerance;
  Table& t = r.table("instances", {"instance", "transposition", "M", "N", "hatM", "hatN", "psi1_symmetry"});
  double worst = 0.0;
  for (int i = 0; i < c.checks.instances; ++i) {
    Sampler rng(check_seed(c) + static_cast<std::uint64_t>(i));
    const DualityRow d = duality_instance(p, rng);
    t.rows.push_back({static_cast<double>(i), d.transposition, d.M, d.N, d.hatM, d.hatN, d.psi1});
    worst = std::max({worst, d.transposition, d.M, d.N, d.hatM, d.hatN, d.psi1});
  }
  r.body["max_relative_residual"] = worst;
  r.check("duality", worst <= exact_tolerance);
}

/// Ensemble version: each identity is an average over paths of a per-path
/// discrepancy, compared with three standard errors of that average.
inline void duality_check(const LQProblem<MonteCarloSpace>& p, const ProblemConfig& c, ResultReport& r) {
  const MonteCarloSpace& s = *p.space;
  const int first = p.initial_level;
  const int K = p.steps();
  const std::size_t M = s.options().paths;
  const Eigen::Index Nd = p.state_dim();
  r.body["backend"] = backend_label(s);
  r.body["instances"] = c.checks.instances;
  r.body["tolerance_kind"] = "statistical: |mean discrepancy| <= 3 standard errors";
  r.body["identities"] = {"transposition", "M", "N", "hatM", "hatN"};
  Table& t = r.table("instances", {"instance", "identity", "mean_discrepancy", "three_sigma_bound"});
  bool ok = true;
  for (int i = 0; i < c.checks.instances; ++i) {
    Sampler rng(check_seed(c) + static_cast<std::uint64_t>(i));
    const LevelValues<Vector> yT = random_adapted(s, K, K, Nd, rng).level(K);
    const Process xi = random_adapted(s, first, K - 1, Nd, rng);
    const LevelValues<Vector> eta0 = random_adapted(s, first, first, Nd, rng).level(first);
    const Process v1 = random_adapted(s, first, K - 1, Nd, rng);
    const Process v2 = random_adapted(s, first, K - 1, Nd, rng);
    const ControlProcess u = random_control(p, rng);
    const Vector eta = rng.vector(Nd, 1.0);
    const OperatorBundle<MonteCarloSpace> ops(p);

    const BackwardPair adj = solve_backward(p, yT, xi);
    const Process phi = propagate(
        s, p.A, first, eta0, [&](int k, std::size_t n, const Vector&) { return v1(k, n); },
        [&](int k, std::size_t n, const Vector&) { return v2(k, n); });
    const Process f = tabulate(s, first, K - 1, [&](int k, std::size_t n) {
      Vector out = -(p.coeffs.A1(k, n).transpose() * adj.yhat(k, n));
      out.noalias() -= p.coeffs.C(k, n).transpose() * adj.Y(k, n);
      out -= xi(k, n);
      return out;
    });
    auto d = minus(per_path(phi.level(K), adj.y.level(K), M), per_path(s, slice(phi, first, K - 1), f));
    d = minus(d, per_path(eta0, adj.y.level(first), M));
    d = minus(d, per_path(s, v1, adj.yhat));
    d = minus(d, per_path(s, v2, adj.Y));
    std::vector<StatisticalResidual> res;
    res.push_back(statistical(d));
    res.push_back(statistical(minus(per_path(s, ops.running(ops.apply_M(u)), xi), per_path(s, u, ops.apply_M_star(xi)))));
    const Vector nstar = ops.apply_N_star(xi);
    res.push_back(statistical(minus(per_path(s, ops.running(ops.apply_N(eta)), xi),
                                    std::vector<double>(M, eta.dot(nstar)))));
    res.push_back(statistical(minus(per_path(ops.apply_hatM(u), yT, M), per_path(s, u, ops.apply_hatM_star(yT)))));
    const Vector hnstar = ops.apply_hatN_star(yT);
    res.push_back(statistical(minus(per_path(ops.apply_hatN(eta), yT, M), std::vector<double>(M, eta.dot(hnstar)))));
    for (std::size_t j = 0; j < res.size(); ++j) {
      t.rows.push_back({static_cast<double>(i), static_cast<double>(j), res[j].mean, res[j].bound});
      ok = ok && res[j].within();
    }
  }
  r.check("duality_statistical", ok);
}

template <FilteredSpace Space>
void oracle_compare(const LQProblem<Space>& p, const ProblemConfig& c, ResultReport& r) {
  const Space& s = *p.space;
  const DenseMinimizer dense = brute_force_minimizer(p);
  const OpenLoopSolution sol = solve_open_loop(p, solve_options(c));
  const ControlProcess diff = combine(s, 1.0, sol.u, -1.0, dense.u);
  double max_abs = 0.0;
  for (int k = diff.first_level(); k <= diff.last_level(); ++k) {
    for (const auto& v : diff.level(k)) max_abs = std::max(max_abs, v.cwiseAbs().maxCoeff());
  }
  const double cost_gap = std::abs(sol.diagnostics.cost - dense.cost);
  const double cost_scale = std::max(1.0, std::abs(dense.cost));
  Sampler rng(check_seed(c));
  double min_change = std::numeric_limits<double>::infinity();
  for (int i = 0; i < c.checks.deviations; ++i) {
    // Step sizes 1, 1e-1, ..., 1e-4.
    const double scale = std::pow(10.0, -(i % 5));
    const ControlProcess v = random_control(p, rng);
    min_change = std::min(min_change, cost(p, combine(s, 1.0, sol.u, scale, v)) - sol.diagnostics.cost);
  }
  if (c.checks.deviations == 0) min_change = 0.0;
  r.body["backend"] = backend_label(s);
  r.body["control_dim"] = dense.dim;
  r.body["cost_operator"] = sol.diagnostics.cost;
  r.body["cost_dense"] = dense.cost;
  r.body["cost_gap"] = cost_gap;
  r.body["control_distance"] = process_norm(s, diff);
  r.body["control_max_abs_gap"] = max_abs;
  r.body["gradient_norm"] = sol.diagnostics.gradient_norm;
  r.body["hessian_asymmetry"] = dense.hessian_asymmetry;
  r.body["min_hessian_eig"] = dense.min_hessian_eig;
  r.body["min_perturbation_change"] = min_change;
  r.check("control", process_norm(s, diff) <= 1e-8 && max_abs <= 1e-8);
  r.check("cost", cost_gap <= 1e-10 * cost_scale);
  r.check("gradient_norm", sol.diagnostics.gradient_norm <= stationarity_tolerance);
  r.check("hessian_symmetry", dense.hessian_asymmetry <= 1e-10);
  r.check("perturbations", min_change >= -1e-9);
}

/// ||y - yhat|| over the running levels at the optimal control.
template <FilteredSpace Space>
double adjoint_gap(const LQProblem<Space>& p, const ControlProcess& u) {
  const ForwardBackward<Space> fb = forward_backward(p, p.eta, &u, true);
  const Process y = slice(fb.adjoint.y, p.initial_level, p.steps() - 1);
  return process_norm(*p.space, combine(*p.space, 1.0, y, -1.0, fb.adjoint.yhat));
}

inline void convergence(const ProblemConfig& c, ResultReport& r) {
  if (!grid_independent(c)) {
    throw Error(ErrorCode::config, "convergence: every field must be a constant to be re-gridded");
  }
  std::vector<int> Ks = c.checks.convergence_K;
  if (Ks.size() < 2) throw Error(ErrorCode::config, "checks.convergence_K: need at least two grids");
  std::vector<double> costs;
  std::vector<double> gaps;
  std::vector<std::string> backends;
  for (int K : Ks) {
    ProblemConfig ck = c;
    ck.K = K;
    if (ck.initial_level != 0) throw Error(ErrorCode::config, "convergence: initial.level must be 0");
    with_problem(ck, K, [&](const auto& p) {
      const OpenLoopSolution sol = solve_open_loop(p, solve_options(ck));
      costs.push_back(sol.diagnostics.cost);
      gaps.push_back(adjoint_gap(p, sol.u));
      backends.push_back(backend_label(*p.space));
    });
  }
  const bool have_reference = c.checks.reference_cost.has_value();
  const double ref = have_reference ? *c.checks.reference_cost : costs.back();
  const std::size_t compared = have_reference ? Ks.size() : Ks.size() - 1;
  // Differences below this floor are rounding, not discretization.
  const double floor = 1e-14 * std::max(1.0, std::abs(ref));
  Table& t = r.table("study", {"K", "cost", "error", "error_ratio", "adjoint_gap", "adjoint_gap_ratio"});
  bool monotone = true;
  ordered_json ratios = ordered_json::array();
  for (std::size_t i = 0; i < Ks.size(); ++i) {
    const double err = std::abs(costs[i] - ref);
    const double prev_err = i > 0 ? std::abs(costs[i - 1] - ref) : std::numeric_limits<double>::quiet_NaN();
    const double ratio = i > 0 && err > floor ? prev_err / err : std::numeric_limits<double>::quiet_NaN();
    const double gratio = i > 0 && gaps[i] > 0.0 ? gaps[i - 1] / gaps[i] : std::numeric_limits<double>::quiet_NaN();
    t.rows.push_back({static_cast<double>(Ks[i]), costs[i], i < compared ? err : 0.0, ratio, gaps[i], gratio});
    if (i > 0 && i < compared && err > prev_err + floor) monotone = false;
    if (i > 0) ratios.push_back(std::isnan(ratio) ? ordered_json(nullptr) : ordered_json(ratio));
  }
  r.body["backends"] = backends;
  r.body["reference_cost"] = ref;
  r.body["reference_kind"] = have_reference ? "configured" : "finest grid";
  r.body["roundoff_floor"] = floor;
  r.body["final_error"] = compared > 0 ? std::abs(costs[compared - 1] - ref) : 0.0;
  r.body["error_ratios"] = ratios;
  r.check("monotone_error", monotone);
}

inline int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::config:
    case ErrorCode::invalid_grid:
    case ErrorCode::shape:
    case ErrorCode::io:
      return 2;
    default:
      return 3;
  }
}

}  // namespace detail

/// Applies a --seed override: it replaces the random-instance seed and the
/// ensemble seed, and is folded into the config hash.
inline void apply_seed(ProblemConfig& c, const RunOptions& o) {
  if (!o.seed) return;
  c.random.seed = *o.seed;
  c.backend.mc.seed = *o.seed;
  c.hash = detail::fnv1a_hex(c.hash + ":seed=" + std::to_string(*o.seed));
}

inline CommandOutcome run_command(const std::string& command, ProblemConfig c, const RunOptions& options = {}) {
  apply_seed(c, options);
  CommandOutcome out;
  ResultReport& r = out.report;
  r.command = command;
  r.config_hash = c.hash;
  r.body["mode"] = c.mode;
  try {
    const bool slq = c.mode == "slq";
    if (command == "validate") {
      if (slq) {
        detail::with_problem(c, c.K, [&](const auto& p) { detail::validate_slq(p, c, r); });
      } else {
        detail::with_game(c, [&](const auto& g) { detail::validate_game(g, c, r); });
      }
      // Validation is informational.
      out.exit_code = 0;
      return out;
    }
    if (command == "nash") {
      if (slq) throw Error(ErrorCode::config, "mode: nash needs a game configuration");
      detail::with_game(c, [&](const auto& g) {
        r.body["backend"] = detail::backend_label(*g.space);
        NashOptions no;
        no.tolerance = c.solver.tolerance;
        no.max_iter_factor = c.solver.max_iter_factor;
        no.finiteness = detail::finiteness_options(c);
        try {
          const NashCandidate cand = solve_nash(g, no);
          VerifyOptions vo;
          vo.deviations = c.checks.deviations;
          vo.seed = detail::check_seed(c);
          vo.solve = detail::solve_options(c);
          const NashVerification v = verify_nash(g, cand, vo);
          r.body["label"] = cand.label();
          r.body["solver"] = cand.solver;
          r.body["iterations"] = cand.iterations;
          r.body["relative_residual"] = cand.relative_residual;
          for (std::size_t i = 0; i < 2; ++i) {
            const std::string key = "player" + std::to_string(i + 1);
            r.body[key]["stationarity_residual"] = cand.residual[i];
            r.body[key]["convex"] = cand.convexity[i].convex;
            r.body[key]["min_eig"] = cand.convexity[i].min_eig;
            r.body[key]["cost"] = v.players[i].equilibrium_cost;
            r.body[key]["best_response_distance"] = v.players[i].best_response_distance;
            r.body[key]["min_deviation_change"] = v.players[i].min_cost_change;
            r.body[key]["control_norm"] = process_norm(*g.space, cand.u[i]);
          }
          r.check("certified", cand.certified);
          r.check("best_response", v.players[0].best_response_ok && v.players[1].best_response_ok);
          r.check("deviations", v.players[0].deviations_ok && v.players[1].deviations_ok);
        } catch (const NoEquilibriumError& e) {
          r.body["label"] = "no equilibrium found";
          r.body["error"] = e.what();
          r.body["relative_residual"] = e.relative_residual();
          r.check("solved", false);
        }
      });
    } else if (command == "convergence") {
      if (!slq) throw Error(ErrorCode::config, "mode: convergence needs an slq configuration");
      detail::convergence(c, r);
    } else if (command == "solve" || command == "gradient-check" || command == "duality-check" ||
               command == "oracle-compare") {
      if (!slq) throw Error(ErrorCode::config, "mode: " + command + " needs an slq configuration");
      detail::with_problem(c, c.K, [&](const auto& p) {
        if (command == "solve") detail::solve_slq(p, c, r);
        if (command == "gradient-check") detail::gradient_check(p, c, r);
        if (command == "duality-check") detail::duality_check(p, c, r);
        if (command == "oracle-compare") detail::oracle_compare(p, c, r);
      });
    } else {
      throw Error(ErrorCode::config, "unknown command " + command);
    }
    out.exit_code = r.pass ? 0 : 1;
  } catch (const Error& e) {
    r.pass = false;
    r.body["error"] = {{"kind", to_string(e.code())}, {"message", e.what()}};
    out.exit_code = detail::exit_code_for(e.code());
  }
  return out;
}

}  // namespace slq::io
