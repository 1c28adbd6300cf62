#pragma once

// Spectral Galerkin model: diagonal generator A, adapted coefficient and
// weight tables, the LQ problem record and its standing-condition checks.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "slq/adapted.hpp"
#include "slq/error.hpp"
#include "slq/tree.hpp"

namespace slq {

/// Generator A with eigenvalues lambda_n in its own eigenbasis. A is
/// self-adjoint there, so A* acts identically.
struct SpectralOperator {
  Vector eigenvalues;

  int dim() const { return static_cast<int>(eigenvalues.size()); }

  Vector propagator(double dt) const {
    if (dt < 0.0) throw Error(ErrorCode::domain, "semigroup time step must be nonnegative");
    return (eigenvalues.array() * dt).exp().matrix();
  }
};

inline Vector semigroup_apply(const SpectralOperator& A, double dt, const Vector& v) {
  if (v.size() != A.eigenvalues.size()) throw Error(ErrorCode::shape, "semigroup argument has wrong dimension");
  return A.propagator(dt).cwiseProduct(v);
}

/// Dirichlet Laplacian on (0,1): lambda_n = -n^2 pi^2.
inline SpectralOperator dirichlet_laplacian(int N) {
  if (N < 1) throw Error(ErrorCode::domain, "mode count must be >= 1");
  SpectralOperator A{Vector(N)};
  for (int n = 1; n <= N; ++n) A.eigenvalues(n - 1) = -static_cast<double>(n) * n * std::numbers::pi * std::numbers::pi;
  return A;
}

/// Drift/diffusion coefficients on levels 0..K-1.
struct CoefficientSet {
  MatrixField A1;  // N x N
  MatrixField B;   // N x m
  MatrixField C;   // N x N
  MatrixField D;   // N x m
  Process b;       // N
  Process sigma;   // N
};

/// Running weights on levels 0..K-1, terminal weights G, g on level K.
struct WeightSet {
  MatrixField Q;  // N x N
  MatrixField R;  // m x m
  MatrixField S;  // m x N
  MatrixField G;  // N x N
  Process q;      // N
  Process r;      // m
  Process g;      // N
};

template <FilteredSpace Space>
struct LQProblem {
  std::shared_ptr<const Space> space;
  SpectralOperator A;
  int control_dim = 1;
  CoefficientSet coeffs;
  WeightSet weights;
  int initial_level = 0;
  Vector eta;
  // Coefficient of <S x, u> inside the bracket of the running cost (1 or 2).
  double s_factor = 2.0;
  // Control independent cost added to the functional; used when a game is
  // reduced to a single-player problem.
  double cost_constant = 0.0;

  int state_dim() const { return A.dim(); }
  int steps() const { return space->steps(); }
  double dt() const { return space->grid().dt(); }
  double cross_weight() const { return 0.5 * s_factor; }
};

namespace detail {

template <FilteredSpace Space>
void check_matrix_field(const Space& space, const MatrixField& f, int first, int last, Eigen::Index rows,
                        Eigen::Index cols, const std::string& name) {
  require_range(f, first, last, name);
  require_atoms(space, f, name);
  for (int k = first; k <= last; ++k) {
    for (std::size_t n = 0; n < f.level(k).size(); ++n) {
      const Matrix& m = f.level(k)[n];
      if (m.rows() != rows || m.cols() != cols) {
        std::ostringstream os;
        os << name << " on level " << k << " is " << m.rows() << "x" << m.cols() << ", expected " << rows << "x"
           << cols;
        throw Error(ErrorCode::shape, os.str());
      }
      if (!m.allFinite()) throw Error(ErrorCode::numeric, name + " has non-finite entries on level " + std::to_string(k));
    }
  }
}

template <FilteredSpace Space>
void check_vector_field(const Space& space, const Process& f, int first, int last, Eigen::Index size,
                        const std::string& name) {
  require_range(f, first, last, name);
  require_atoms(space, f, name);
  for (int k = first; k <= last; ++k) {
    for (const Vector& v : f.level(k)) {
      if (v.size() != size) {
        throw Error(ErrorCode::shape, name + " on level " + std::to_string(k) + " has dimension " +
                                          std::to_string(v.size()) + ", expected " + std::to_string(size));
      }
      if (!v.allFinite()) throw Error(ErrorCode::numeric, name + " has non-finite entries on level " + std::to_string(k));
    }
  }
}

template <class T>
bool all_zero(const Adapted<T>& f) {
  for (int k = f.first_level(); k <= f.last_level(); ++k) {
    for (const auto& v : f.level(k)) {
      if (!v.isZero(0.0)) return false;
    }
  }
  return true;
}

template <class T>
bool all_broadcast(const Adapted<T>& f) {
  for (int k = f.first_level(); k <= f.last_level(); ++k) {
    if (f.level(k).size() != 1) return false;
  }
  return true;
}

inline double min_symmetric_eigenvalue(const Matrix& m) {
  if (m.size() == 0) return std::numeric_limits<double>::infinity();
  const Matrix sym = 0.5 * (m + m.transpose());
  return Eigen::SelfAdjointEigenSolver<Matrix>(sym, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
}

}  // namespace detail

/// Throws shape/numeric errors for any inconsistent table.
template <FilteredSpace Space>
void require_consistent(const LQProblem<Space>& p) {
  if (!p.space) throw Error(ErrorCode::shape, "problem has no probability space");
  const Space& s = *p.space;
  const int K = s.steps();
  const Eigen::Index N = p.state_dim();
  const Eigen::Index m = p.control_dim;
  if (N < 1 || m < 1) throw Error(ErrorCode::shape, "state and control dimensions must be >= 1");
  if (!p.A.eigenvalues.allFinite()) throw Error(ErrorCode::numeric, "generator eigenvalues must be finite");
  if (p.initial_level < 0 || p.initial_level >= K) {
    throw Error(ErrorCode::shape, "initial level " + std::to_string(p.initial_level) + " outside 0.." + std::to_string(K - 1));
  }
  if (p.eta.size() != N) throw Error(ErrorCode::shape, "initial state eta has wrong dimension");
  if (!p.eta.allFinite()) throw Error(ErrorCode::numeric, "initial state eta is not finite");
  if (p.s_factor != 1.0 && p.s_factor != 2.0) throw Error(ErrorCode::domain, "S factor must be 1 or 2");
  detail::check_matrix_field(s, p.coeffs.A1, 0, K - 1, N, N, "coefficients.A1");
  detail::check_matrix_field(s, p.coeffs.B, 0, K - 1, N, m, "coefficients.B");
  detail::check_matrix_field(s, p.coeffs.C, 0, K - 1, N, N, "coefficients.C");
  detail::check_matrix_field(s, p.coeffs.D, 0, K - 1, N, m, "coefficients.D");
  detail::check_vector_field(s, p.coeffs.b, 0, K - 1, N, "coefficients.b");
  detail::check_vector_field(s, p.coeffs.sigma, 0, K - 1, N, "coefficients.sigma");
  detail::check_matrix_field(s, p.weights.Q, 0, K - 1, N, N, "weights.Q");
  detail::check_matrix_field(s, p.weights.R, 0, K - 1, m, m, "weights.R");
  detail::check_matrix_field(s, p.weights.S, 0, K - 1, m, N, "weights.S");
  detail::check_matrix_field(s, p.weights.G, K, K, N, N, "weights.G");
  detail::check_vector_field(s, p.weights.q, 0, K - 1, N, "weights.q");
  detail::check_vector_field(s, p.weights.r, 0, K - 1, m, "weights.r");
  detail::check_vector_field(s, p.weights.g, K, K, N, "weights.g");
}

struct ValidationReport {
  std::vector<std::string> symmetry_violations;
  double max_skew = 0.0;
  bool standard = false;
  double delta = 0.0;      // smallest eigenvalue of R over all atoms
  double min_eig_Q = 0.0;  // smallest eigenvalue of Q over all atoms
  double min_eig_G = 0.0;  // smallest eigenvalue of G over all leaves
  bool s_zero = true;
  // Smallest eigenvalue of the per-atom block [[Q, cS^T], [cS, R]]; only
  // computed when S is not identically zero.
  double min_eig_joint = 0.0;

  bool symmetric() const { return symmetry_violations.empty(); }
};

inline constexpr double symmetry_tolerance = 1e-12;
inline constexpr double psd_tolerance = 1e-12;

/// Report-only check of symmetry and standard-LQ status from the initial
/// level onwards. Never mutates the problem.
template <FilteredSpace Space>
ValidationReport validate_conditions(const LQProblem<Space>& p) {
  require_consistent(p);
  ValidationReport report;
  const int K = p.steps();
  const double inf = std::numeric_limits<double>::infinity();
  report.delta = inf;
  report.min_eig_Q = inf;
  report.min_eig_G = inf;
  report.min_eig_joint = inf;
  report.s_zero = detail::all_zero(slice(p.weights.S, p.initial_level, K - 1));

  auto check_symmetric = [&](const MatrixField& f, int k, std::size_t n, const std::string& name) {
    const Matrix& m = f.level(k)[n];
    const double skew = (m - m.transpose()).cwiseAbs().maxCoeff();
    report.max_skew = std::max(report.max_skew, skew);
    if (skew > symmetry_tolerance) {
      std::ostringstream os;
      os << name << " level " << k << " node " << (f.level(k).size() == 1 ? std::string("*") : std::to_string(n))
         << ": skew " << skew;
      report.symmetry_violations.push_back(os.str());
    }
  };

  const double c = p.cross_weight();
  for (int k = p.initial_level; k < K; ++k) {
    for (std::size_t n = 0; n < p.weights.Q.level(k).size(); ++n) {
      check_symmetric(p.weights.Q, k, n, "Q");
      report.min_eig_Q = std::min(report.min_eig_Q, detail::min_symmetric_eigenvalue(p.weights.Q.level(k)[n]));
    }
    for (std::size_t n = 0; n < p.weights.R.level(k).size(); ++n) {
      check_symmetric(p.weights.R, k, n, "R");
      report.delta = std::min(report.delta, detail::min_symmetric_eigenvalue(p.weights.R.level(k)[n]));
    }
    if (!report.s_zero) {
      const std::size_t atoms = p.space->level_size(k);
      for (std::size_t n = 0; n < atoms; ++n) {
        const Matrix& Q = p.weights.Q(k, n);
        const Matrix& R = p.weights.R(k, n);
        const Matrix& S = p.weights.S(k, n);
        const Eigen::Index N = Q.rows();
        const Eigen::Index m = R.rows();
        Matrix joint(N + m, N + m);
        joint << Q, c * S.transpose(), c * S, R;
        report.min_eig_joint = std::min(report.min_eig_joint, detail::min_symmetric_eigenvalue(joint));
        if (p.weights.Q.broadcast(k) && p.weights.R.broadcast(k) && p.weights.S.broadcast(k)) break;
      }
    }
  }
  for (std::size_t n = 0; n < p.weights.G.level(K).size(); ++n) {
    check_symmetric(p.weights.G, K, n, "G");
    report.min_eig_G = std::min(report.min_eig_G, detail::min_symmetric_eigenvalue(p.weights.G.level(K)[n]));
  }
  report.standard = report.min_eig_Q >= -psd_tolerance && report.delta > 0.0 && report.min_eig_G >= -psd_tolerance &&
                    (report.s_zero || report.min_eig_joint >= -psd_tolerance);
  return report;
}

/// Replaces Q, R, G by their symmetric parts. Only applied on explicit request.
template <FilteredSpace Space>
void symmetrize_weights(LQProblem<Space>& p) {
  for (MatrixField* f : {&p.weights.Q, &p.weights.R, &p.weights.G}) {
    for (int k = f->first_level(); k <= f->last_level(); ++k) {
      for (Matrix& m : f->level(k)) m = (0.5 * (m + m.transpose())).eval();
    }
  }
}

/// Problem skeleton on the given space: heat generator, zero coefficients,
/// Q = R = I, S = G = 0, zero linear terms, eta = 0, initial level 0.
template <FilteredSpace Space>
LQProblem<Space> heat_preset(std::shared_ptr<const Space> space, int N, int m) {
  if (N < 1 || m < 1) throw Error(ErrorCode::domain, "heat preset needs N >= 1 and m >= 1");
  const int K = space->steps();
  LQProblem<Space> p;
  p.space = std::move(space);
  p.A = dirichlet_laplacian(N);
  p.control_dim = m;
  p.coeffs.A1 = constant_field<Matrix>(0, K - 1, Matrix::Zero(N, N));
  p.coeffs.B = constant_field<Matrix>(0, K - 1, Matrix::Zero(N, m));
  p.coeffs.C = constant_field<Matrix>(0, K - 1, Matrix::Zero(N, N));
  p.coeffs.D = constant_field<Matrix>(0, K - 1, Matrix::Zero(N, m));
  p.coeffs.b = constant_field<Vector>(0, K - 1, Vector::Zero(N));
  p.coeffs.sigma = constant_field<Vector>(0, K - 1, Vector::Zero(N));
  p.weights.Q = constant_field<Matrix>(0, K - 1, Matrix::Identity(N, N));
  p.weights.R = constant_field<Matrix>(0, K - 1, Matrix::Identity(m, m));
  p.weights.S = constant_field<Matrix>(0, K - 1, Matrix::Zero(m, N));
  p.weights.G = constant_field<Matrix>(K, K, Matrix::Zero(N, N));
  p.weights.q = constant_field<Vector>(0, K - 1, Vector::Zero(N));
  p.weights.r = constant_field<Vector>(0, K - 1, Vector::Zero(m));
  p.weights.g = constant_field<Vector>(K, K, Vector::Zero(N));
  p.eta = Vector::Zero(N);
  return p;
}

/// Same operators with every inhomogeneous term removed (eta, b, sigma, q, r,
/// g and the cost constant set to zero).
template <FilteredSpace Space>
LQProblem<Space> homogeneous(const LQProblem<Space>& p) {
  LQProblem<Space> h = p;
  const int K = p.steps();
  const Eigen::Index N = p.state_dim();
  h.coeffs.b = constant_field<Vector>(0, K - 1, Vector::Zero(N));
  h.coeffs.sigma = constant_field<Vector>(0, K - 1, Vector::Zero(N));
  h.weights.q = constant_field<Vector>(0, K - 1, Vector::Zero(N));
  h.weights.r = constant_field<Vector>(0, K - 1, Vector::Zero(p.control_dim));
  h.weights.g = constant_field<Vector>(K, K, Vector::Zero(N));
  h.eta = Vector::Zero(N);
  h.cost_constant = 0.0;
  return h;
}

/// True when no noise enters the state (C = D = sigma = 0) and every table is
/// deterministic, so the tree collapses to a single scenario.
template <FilteredSpace Space>
bool is_noise_free(const LQProblem<Space>& p) {
  const auto& c = p.coeffs;
  const auto& w = p.weights;
  return detail::all_zero(c.C) && detail::all_zero(c.D) && detail::all_zero(c.sigma) && detail::all_broadcast(c.A1) &&
         detail::all_broadcast(c.B) && detail::all_broadcast(c.b) && detail::all_broadcast(w.Q) &&
         detail::all_broadcast(w.R) && detail::all_broadcast(w.S) && detail::all_broadcast(w.G) &&
         detail::all_broadcast(w.q) && detail::all_broadcast(w.r) && detail::all_broadcast(w.g);
}

/// Moves a noise-free problem onto the one-scenario space.
template <FilteredSpace Space>
LQProblem<DeterministicSpace> collapse(const LQProblem<Space>& p) {
  if (!is_noise_free(p)) throw Error(ErrorCode::domain, "only noise-free deterministic problems can be collapsed");
  LQProblem<DeterministicSpace> out;
  out.space = std::make_shared<const DeterministicSpace>(p.space->grid());
  out.A = p.A;
  out.control_dim = p.control_dim;
  out.coeffs = p.coeffs;
  out.weights = p.weights;
  out.initial_level = p.initial_level;
  out.eta = p.eta;
  out.s_factor = p.s_factor;
  out.cost_constant = p.cost_constant;
  return out;
}

}  // namespace slq
