#pragma once

// Operator bundle of the open-loop LQ problem and everything built on it:
// the state operators M, N, their terminal versions, the inhomogeneous path h,
// the adjoints realised by backward solves, the Psi/phi decomposition of the
// cost, the Frechet gradient, the finiteness check and the CG minimiser.
//
// All control-space linear algebra runs on flat vectors ordered by
// (level, atom, component) with the weighted inner product that reproduces
// pair_processes.

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "slq/adapted.hpp"
#include "slq/backward.hpp"
#include "slq/error.hpp"
#include "slq/forward.hpp"
#include "slq/galerkin.hpp"
#include "slq/krylov.hpp"

namespace slq {

/// Flat coordinates for processes on levels first..last with `dim`
/// components per atom.
template <FilteredSpace Space>
class ControlLayout {
 public:
  ControlLayout(const Space& space, int first, int last, int dim) : space_(&space), first_(first), last_(last), dim_(dim) {
    offsets_.push_back(0);
    for (int k = first; k <= last; ++k) {
      offsets_.push_back(offsets_.back() + static_cast<Eigen::Index>(space.level_size(k)) * dim);
    }
  }

  Eigen::Index size() const { return offsets_.back(); }
  int first_level() const { return first_; }
  int last_level() const { return last_; }

  Eigen::Index index(int k, std::size_t n, int component) const {
    return offsets_[static_cast<std::size_t>(k - first_)] + static_cast<Eigen::Index>(n) * dim_ + component;
  }

  Vector flatten(const Process& u) const {
    Vector out(size());
    for (int k = first_; k <= last_; ++k) {
      for (std::size_t n = 0; n < space_->level_size(k); ++n) out.segment(index(k, n, 0), dim_) = u(k, n);
    }
    return out;
  }

  Process unflatten(const Vector& v) const {
    if (v.size() != size()) throw Error(ErrorCode::shape, "flat vector has wrong length");
    return tabulate(*space_, first_, last_,
                    [&](int k, std::size_t n) { return Vector(v.segment(index(k, n, 0), dim_)); });
  }

  krylov::WeightedInner inner() const {
    Vector w(size());
    const double dt = space_->grid().dt();
    for (int k = first_; k <= last_; ++k) {
      const auto begin = offsets_[static_cast<std::size_t>(k - first_)];
      const auto count = offsets_[static_cast<std::size_t>(k - first_ + 1)] - begin;
      w.segment(begin, count).setConstant(dt * space_->probability(k));
    }
    return krylov::WeightedInner{std::move(w)};
  }

 private:
  const Space* space_;
  int first_;
  int last_;
  int dim_;
  std::vector<Eigen::Index> offsets_;
};

template <FilteredSpace Space>
ControlLayout<Space> control_layout(const LQProblem<Space>& p) {
  return ControlLayout<Space>(*p.space, p.initial_level, p.steps() - 1, p.control_dim);
}

template <FilteredSpace Space>
ControlProcess zero_control(const LQProblem<Space>& p) {
  return filled(*p.space, p.initial_level, p.steps() - 1, Vector(Vector::Zero(p.control_dim)));
}

namespace detail {

/// B^T yhat + D^T Y on the running levels.
template <FilteredSpace Space>
ControlProcess input_adjoint(const LQProblem<Space>& p, const BackwardPair& adj) {
  const auto& c = p.coeffs;
  return tabulate(*p.space, p.initial_level, p.steps() - 1, [&](int k, std::size_t n) {
    Vector out = c.B(k, n).transpose() * adj.yhat(k, n);
    out.noalias() += c.D(k, n).transpose() * adj.Y(k, n);
    return out;
  });
}

template <FilteredSpace Space>
Process zero_source(const LQProblem<Space>& p) {
  return constant_field<Vector>(p.initial_level, p.steps() - 1, Vector::Zero(p.state_dim()));
}

template <FilteredSpace Space>
LevelValues<Vector> zero_terminal(const LQProblem<Space>& p) {
  return LevelValues<Vector>{Vector::Zero(p.state_dim())};
}

}  // namespace detail

/// The operators M, N (state paths), their terminal versions, h, and the
/// adjoints obtained from one backward solve each.
template <FilteredSpace Space>
class OperatorBundle {
 public:
  explicit OperatorBundle(LQProblem<Space> p) : p_(std::move(p)) { require_consistent(p_); }

  const LQProblem<Space>& problem() const { return p_; }

  StatePath apply_M(const ControlProcess& u) const { return simulate(p_, zero_state(), &u, false); }
  StatePath apply_N(const Vector& eta) const { return simulate(p_, eta, nullptr, false); }
  LevelValues<Vector> apply_hatM(const ControlProcess& u) const { return apply_M(u).level(p_.steps()); }
  LevelValues<Vector> apply_hatN(const Vector& eta) const { return apply_N(eta).level(p_.steps()); }
  StatePath compute_h() const { return simulate(p_, zero_state(), nullptr, true); }

  ControlProcess apply_M_star(const Process& xi) const {
    return detail::input_adjoint(p_, solve_backward(p_, detail::zero_terminal(p_), xi));
  }
  Vector apply_N_star(const Process& xi) const {
    const BackwardPair adj = solve_backward(p_, detail::zero_terminal(p_), xi);
    return level_mean(*p_.space, p_.initial_level, adj.y.level(p_.initial_level));
  }
  ControlProcess apply_hatM_star(const LevelValues<Vector>& yT) const {
    return detail::input_adjoint(p_, solve_backward(p_, yT, detail::zero_source(p_)));
  }
  Vector apply_hatN_star(const LevelValues<Vector>& yT) const {
    const BackwardPair adj = solve_backward(p_, yT, detail::zero_source(p_));
    return level_mean(*p_.space, p_.initial_level, adj.y.level(p_.initial_level));
  }

  /// Running part (levels first..K-1) of a state path, the domain paired with
  /// sources xi.
  Process running(const StatePath& x) const { return slice(x, p_.initial_level, p_.steps() - 1); }

 private:
  Vector zero_state() const { return Vector::Zero(p_.state_dim()); }

  LQProblem<Space> p_;
};

/// One forward and one backward sweep:
///   x    = state from (eta, u) [+ b, sigma]
///   xi   = Q x + c S^T u [+ q],   y_T = G x(T) [+ g]
///   out  = B^T yhat + D^T Y + c S x + R u [+ r]
/// with c = s_factor / 2. With the inhomogeneous terms this is the Frechet
/// gradient; without them and with eta = 0 it is Psi_1 u.
template <FilteredSpace Space>
struct ForwardBackward {
  StatePath x;
  BackwardPair adjoint;
  ControlProcess stationarity;
};

template <FilteredSpace Space>
ForwardBackward<Space> forward_backward(const LQProblem<Space>& p, const Vector& eta, const ControlProcess* u,
                                        bool with_inhomogeneous) {
  const Space& s = *p.space;
  const int first = p.initial_level;
  const int K = p.steps();
  const double c = p.cross_weight();
  const auto& w = p.weights;
  ForwardBackward<Space> out;
  out.x = simulate(p, eta, u, with_inhomogeneous);
  const Process xi = tabulate(s, first, K - 1, [&](int k, std::size_t n) {
    Vector v = w.Q(k, n) * out.x(k, n);
    if (u) v.noalias() += c * (w.S(k, n).transpose() * (*u)(k, n));
    if (with_inhomogeneous) v += w.q(k, n);
    return v;
  });
  LevelValues<Vector> yT;
  yT.reserve(s.level_size(K));
  for (std::size_t j = 0; j < s.level_size(K); ++j) {
    Vector v = w.G(K, j) * out.x(K, j);
    if (with_inhomogeneous) v += w.g(K, j);
    yT.push_back(std::move(v));
  }
  out.adjoint = solve_backward(p, yT, xi);
  const ControlProcess dual = detail::input_adjoint(p, out.adjoint);
  out.stationarity = tabulate(s, first, K - 1, [&](int k, std::size_t n) {
    Vector v = dual(k, n) + c * (w.S(k, n) * out.x(k, n));
    if (u) v.noalias() += w.R(k, n) * (*u)(k, n);
    if (with_inhomogeneous) v += w.r(k, n);
    return v;
  });
  return out;
}

/// Psi_1, Psi_2, Psi_3, phi_1, phi_2, phi_3 as matrix-free maps.
template <FilteredSpace Space>
class PsiSystem {
 public:
  explicit PsiSystem(LQProblem<Space> p) : ops_(std::move(p)) {}

  const LQProblem<Space>& problem() const { return ops_.problem(); }
  const OperatorBundle<Space>& operators() const { return ops_; }

  /// Combined sweep: one forward (M u), one backward with
  /// y_T = G M^ u and xi = Q M u + c S^T u.
  ControlProcess apply_psi1(const ControlProcess& u) const {
    const auto& p = problem();
    return forward_backward(p, Vector::Zero(p.state_dim()), &u, false).stationarity;
  }

  /// Term-by-term: M*QM u + M^*GM^ u + c S M u + c M* S^T u + R u.
  ControlProcess apply_psi1_by_parts(const ControlProcess& u) const {
    const auto& p = problem();
    const Space& s = *p.space;
    const double c = p.cross_weight();
    const StatePath x = ops_.apply_M(u);
    const ControlProcess a = ops_.apply_M_star(weighted_state(x));
    const ControlProcess b = ops_.apply_hatM_star(terminal_weighted(x.level(p.steps())));
    const ControlProcess d = ops_.apply_M_star(tabulate(s, p.initial_level, p.steps() - 1, [&](int k, std::size_t n) {
      return Vector(p.weights.S(k, n).transpose() * u(k, n));
    }));
    return tabulate(s, p.initial_level, p.steps() - 1, [&](int k, std::size_t n) {
      Vector v = a(k, n) + b(k, n) + c * d(k, n) + c * (p.weights.S(k, n) * x(k, n));
      v.noalias() += p.weights.R(k, n) * u(k, n);
      return v;
    });
  }

  /// M*QN eta + M^*GN^ eta + c S N eta.
  ControlProcess apply_psi2(const Vector& eta) const {
    const auto& p = problem();
    const StatePath x = ops_.apply_N(eta);
    const ControlProcess a = ops_.apply_M_star(weighted_state(x));
    const ControlProcess b = ops_.apply_hatM_star(terminal_weighted(x.level(p.steps())));
    const double c = p.cross_weight();
    return tabulate(*p.space, p.initial_level, p.steps() - 1, [&](int k, std::size_t n) {
      return Vector(a(k, n) + b(k, n) + c * (p.weights.S(k, n) * x(k, n)));
    });
  }

  /// N*QN eta + N^*GN^ eta.
  Vector apply_psi3(const Vector& eta) const {
    const auto& p = problem();
    const StatePath x = ops_.apply_N(eta);
    return ops_.apply_N_star(weighted_state(x)) + ops_.apply_hatN_star(terminal_weighted(x.level(p.steps())));
  }

  /// N*(Q h + q) + N^*(G h(T) + g).
  Vector phi1() const {
    const auto& p = problem();
    const StatePath h = ops_.compute_h();
    return ops_.apply_N_star(weighted_state(h, true)) + ops_.apply_hatN_star(terminal_weighted(h.level(p.steps()), true));
  }

  /// M*(Q h + q) + M^*(G h(T) + g) + c S h + r.
  ControlProcess phi2() const {
    const auto& p = problem();
    const StatePath h = ops_.compute_h();
    const ControlProcess a = ops_.apply_M_star(weighted_state(h, true));
    const ControlProcess b = ops_.apply_hatM_star(terminal_weighted(h.level(p.steps()), true));
    const double c = p.cross_weight();
    return tabulate(*p.space, p.initial_level, p.steps() - 1, [&](int k, std::size_t n) {
      return Vector(a(k, n) + b(k, n) + c * (p.weights.S(k, n) * h(k, n)) + p.weights.r(k, n));
    });
  }

  /// 1/2 E[<G h(T) + 2g, h(T)> + sum dt <Q h + 2q, h>].
  double phi3() const {
    const auto& p = problem();
    const Space& s = *p.space;
    const int K = p.steps();
    const StatePath h = ops_.compute_h();
    const Process running = ops_.running(h);
    const Process weighted = tabulate(s, p.initial_level, K - 1, [&](int k, std::size_t n) {
      return Vector(p.weights.Q(k, n) * h(k, n) + 2.0 * p.weights.q(k, n));
    });
    LevelValues<Vector> terminal;
    for (std::size_t j = 0; j < s.level_size(K); ++j) {
      terminal.push_back(p.weights.G(K, j) * h(K, j) + 2.0 * p.weights.g(K, j));
    }
    return 0.5 * (pair_terminal(s, terminal, h.level(K)) + pair_processes(s, weighted, running));
  }

 private:
  Process weighted_state(const StatePath& x, bool with_q = false) const {
    const auto& p = problem();
    return tabulate(*p.space, p.initial_level, p.steps() - 1, [&](int k, std::size_t n) {
      Vector v = p.weights.Q(k, n) * x(k, n);
      if (with_q) v += p.weights.q(k, n);
      return v;
    });
  }

  LevelValues<Vector> terminal_weighted(const LevelValues<Vector>& xT, bool with_g = false) const {
    const auto& p = problem();
    const int K = p.steps();
    LevelValues<Vector> out;
    out.reserve(xT.size());
    for (std::size_t j = 0; j < xT.size(); ++j) {
      Vector v = p.weights.G(K, j) * xT[j];
      if (with_g) v += p.weights.g(K, j);
      out.push_back(std::move(v));
    }
    return out;
  }

  OperatorBundle<Space> ops_;
};

template <FilteredSpace Space>
PsiSystem<Space> assemble_psi(const LQProblem<Space>& p) {
  return PsiSystem<Space>(p);
}

/// Direct evaluation of the quadratic cost along the simulated state.
template <FilteredSpace Space>
double cost(const LQProblem<Space>& p, const ControlProcess& u) {
  const StatePath x = solve_forward(p, u);
  const Space& s = *p.space;
  const int K = p.steps();
  const double c = p.cross_weight();
  const auto& w = p.weights;
  const double dt = s.grid().dt();
  double running = 0.0;
  for (int k = p.initial_level; k < K; ++k) {
    double level_sum = 0.0;
    for (std::size_t n = 0; n < s.level_size(k); ++n) {
      const Vector& xv = x(k, n);
      const Vector& uv = u(k, n);
      level_sum += 0.5 * xv.dot(w.Q(k, n) * xv) + 0.5 * uv.dot(w.R(k, n) * uv) + c * uv.dot(w.S(k, n) * xv) +
                   w.q(k, n).dot(xv) + w.r(k, n).dot(uv);
    }
    running += dt * s.probability(k) * level_sum;
  }
  double terminal = 0.0;
  for (std::size_t j = 0; j < s.level_size(K); ++j) {
    const Vector& xv = x(K, j);
    terminal += 0.5 * xv.dot(w.G(K, j) * xv) + w.g(K, j).dot(xv);
  }
  terminal *= s.probability(K);
  return running + terminal + p.cost_constant;
}

/// Cost through the Psi decomposition:
/// 1/2 (Psi1 u, u) + (Psi2 eta, u) + 1/2 <Psi3 eta, eta> + <phi1, eta> + (phi2, u) + phi3.
template <FilteredSpace Space>
double cost_psi_form(const LQProblem<Space>& p, const ControlProcess& u) {
  const PsiSystem<Space> psi(p);
  const Space& s = *p.space;
  return 0.5 * pair_processes(s, psi.apply_psi1(u), u) + pair_processes(s, psi.apply_psi2(p.eta), u) +
         0.5 * psi.apply_psi3(p.eta).dot(p.eta) + psi.phi1().dot(p.eta) + pair_processes(s, psi.phi2(), u) +
         psi.phi3() + p.cost_constant;
}

/// Cost of the homogeneous problem from the zero initial state.
template <FilteredSpace Space>
double homogeneous_cost(const LQProblem<Space>& p, const ControlProcess& v) {
  return cost(homogeneous(p), v);
}

/// B^T yhat + D^T Y + c S x + R u + r along the forward-backward pass.
template <FilteredSpace Space>
ControlProcess frechet_gradient(const LQProblem<Space>& p, const ControlProcess& u) {
  require_consistent(p);
  return forward_backward(p, p.eta, &u, true).stationarity;
}

/// pair_processes norm of the stationarity expression.
template <FilteredSpace Space>
double optimality_residual(const LQProblem<Space>& p, const ControlProcess& u) {
  return process_norm(*p.space, frechet_gradient(p, u));
}

/// Psi_1 in flat coordinates, one column per canonical basis control.
template <FilteredSpace Space>
Eigen::MatrixXd dense_psi1(const LQProblem<Space>& p) {
  require_consistent(p);
  const auto layout = control_layout(p);
  const Eigen::Index d = layout.size();
  Eigen::MatrixXd out(d, d);
  const Vector zero = Vector::Zero(p.state_dim());
  Vector e = Vector::Zero(d);
  for (Eigen::Index i = 0; i < d; ++i) {
    e(i) = 1.0;
    const ControlProcess u = layout.unflatten(e);
    out.col(i) = layout.flatten(forward_backward(p, zero, &u, false).stationarity);
    e(i) = 0.0;
  }
  return out;
}

struct FinitenessOptions {
  Eigen::Index dense_threshold = 4096;
  bool allow_iterative = false;
  int lanczos_steps = 200;
  double tolerance = 1e-10;
};

struct FinitenessReport {
  bool nonneg = false;
  double min_eig = 0.0;
  double max_eig = 0.0;
  Eigen::Index dim = 0;
  std::string method;
  double asymmetry = 0.0;  // max |S - S^T| of the weighted Gram matrix (dense only)
};

/// Smallest eigenvalue of Psi_1 as a self-adjoint operator under
/// pair_processes.
template <FilteredSpace Space>
FinitenessReport check_finiteness(const LQProblem<Space>& p, const FinitenessOptions& options = {}) {
  require_consistent(p);
  const auto layout = control_layout(p);
  FinitenessReport out;
  out.dim = layout.size();
  const krylov::WeightedInner ip = layout.inner();
  if (out.dim <= options.dense_threshold) {
    const Eigen::MatrixXd psi = dense_psi1(p);
    const Vector root = ip.weights.array().sqrt().matrix();
    Eigen::MatrixXd sym = root.asDiagonal() * psi * root.cwiseInverse().asDiagonal();
    out.asymmetry = (sym - sym.transpose()).cwiseAbs().maxCoeff();
    sym = (0.5 * (sym + sym.transpose())).eval();
    const Vector eig = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(sym, Eigen::EigenvaluesOnly).eigenvalues();
    out.min_eig = eig.minCoeff();
    out.max_eig = eig.maxCoeff();
    out.method = "dense";
  } else if (options.allow_iterative) {
    const Vector zero = Vector::Zero(p.state_dim());
    auto apply = [&](const Vector& v) {
      const ControlProcess u = layout.unflatten(v);
      return layout.flatten(forward_backward(p, zero, &u, false).stationarity);
    };
    out.min_eig = krylov::lanczos_min_eigenvalue(apply, ip, options.lanczos_steps);
    out.max_eig = -krylov::lanczos_min_eigenvalue([&](const Vector& v) { return Vector(-apply(v)); }, ip,
                                                  options.lanczos_steps);
    out.method = "lanczos";
  } else {
    throw Error(ErrorCode::capacity, "control dimension " + std::to_string(out.dim) + " exceeds dense threshold " +
                                         std::to_string(options.dense_threshold) + " and iterative fallback is disabled");
  }
  out.nonneg = out.min_eig >= -options.tolerance;
  return out;
}

struct SolveOptions {
  double tolerance = 1e-10;
  int max_iter_factor = 10;
  bool least_squares = false;
  bool precondition = true;
};

struct SolveDiagnostics {
  std::string mode;  // "cg", "pcg" or "least-squares"
  krylov::Status status = krylov::Status::max_iterations;
  int iterations = 0;
  double relative_residual = 0.0;
  double gradient_norm = 0.0;
  double cost = 0.0;
  std::vector<std::string> warnings;

  bool converged() const { return status == krylov::Status::converged; }
};

struct OpenLoopSolution {
  ControlProcess u;
  SolveDiagnostics diagnostics;
};

namespace detail {

/// Block R^{-1} per atom, or nullopt when some R block is not positive definite.
template <FilteredSpace Space>
std::optional<std::vector<std::vector<Eigen::LLT<Matrix>>>> control_weight_factors(const LQProblem<Space>& p) {
  std::vector<std::vector<Eigen::LLT<Matrix>>> out;
  for (int k = p.initial_level; k < p.steps(); ++k) {
    std::vector<Eigen::LLT<Matrix>> level;
    for (const Matrix& R : p.weights.R.level(k)) {
      Eigen::LLT<Matrix> llt(0.5 * (R + R.transpose()));
      if (llt.info() != Eigen::Success) return std::nullopt;
      level.push_back(std::move(llt));
    }
    out.push_back(std::move(level));
  }
  return out;
}

}  // namespace detail

/// Minimiser u* = -Psi_1^{-1}(Psi_2 eta + phi_2) by (preconditioned) CG in the
/// pair_processes inner product. Negative curvature raises an indefiniteness
/// error; a singular semidefinite Psi_1 falls back to the minimal-norm
/// least-squares solution with a warning.
template <FilteredSpace Space>
OpenLoopSolution solve_open_loop(const LQProblem<Space>& p, const SolveOptions& options = {}) {
  require_consistent(p);
  const auto layout = control_layout(p);
  const krylov::WeightedInner ip = layout.inner();
  const Vector zero_state = Vector::Zero(p.state_dim());
  auto apply = [&](const Vector& v) {
    const ControlProcess u = layout.unflatten(v);
    return layout.flatten(forward_backward(p, zero_state, &u, false).stationarity);
  };
  const Vector rhs = -layout.flatten(forward_backward(p, p.eta, nullptr, true).stationarity);
  const int max_iter = options.max_iter_factor * static_cast<int>(std::max<Eigen::Index>(layout.size(), 1));

  OpenLoopSolution out;
  SolveDiagnostics& diag = out.diagnostics;
  Vector x = Vector::Zero(layout.size());
  krylov::Result res;
  auto least_squares = [&] {
    diag.mode = "least-squares";
    res = krylov::conjugate_gradient_normal(apply, rhs, x, ip, options.tolerance, max_iter);
  };
  if (options.least_squares) {
    least_squares();
  } else {
    const auto factors = options.precondition ? detail::control_weight_factors(p) : std::nullopt;
    if (factors) {
      diag.mode = "pcg";
      const Space& s = *p.space;
      auto precond = [&](const Vector& r) {
        Vector z(r.size());
        for (int k = p.initial_level; k < p.steps(); ++k) {
          const auto& level = (*factors)[static_cast<std::size_t>(k - p.initial_level)];
          for (std::size_t n = 0; n < s.level_size(k); ++n) {
            const auto i = layout.index(k, n, 0);
            z.segment(i, p.control_dim) = level[level.size() == 1 ? 0 : n].solve(r.segment(i, p.control_dim));
          }
        }
        return z;
      };
      res = krylov::conjugate_gradient(apply, rhs, x, ip, options.tolerance, max_iter, precond);
    } else {
      diag.mode = "cg";
      res = krylov::conjugate_gradient(apply, rhs, x, ip, options.tolerance, max_iter);
    }
    if (res.status == krylov::Status::negative_curvature) {
      throw Error(ErrorCode::indefinite,
                  "CG met negative curvature: Psi_1 is indefinite, run check_finiteness before solving");
    }
    if (!res.converged()) {
      diag.warnings.push_back(std::string("CG stopped with status ") + krylov::to_string(res.status) +
                              "; Psi_1 treated as singular, returning the minimal-norm least-squares solution");
      least_squares();
    }
  }
  if (diag.mode == "least-squares") {
    diag.warnings.push_back("least-squares mode: minimiser is not unique when Psi_1 is singular");
  }
  diag.status = res.status;
  diag.iterations = res.iterations;
  diag.relative_residual = res.relative_residual;
  out.u = layout.unflatten(x);
  diag.gradient_norm = optimality_residual(p, out.u);
  diag.cost = cost(p, out.u);
  return out;
}

}  // namespace slq
