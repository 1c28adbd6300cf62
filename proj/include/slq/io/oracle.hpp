#pragma once

// Dense brute-force minimizer built from cost evaluations only.

#include <Eigen/Cholesky>

#include <cmath>
#include <string>

#include "slq/error.hpp"
#include "slq/galerkin.hpp"
#include "slq/lq_core.hpp"

namespace slq::io {

inline constexpr Eigen::Index oracle_capacity = 200;

struct DenseMinimizer {
  ControlProcess u;
  double cost = 0.0;
  Eigen::Index dim = 0;
  double hessian_asymmetry = 0.0;  // max |H_ij - H_ji| / max |H|
  double min_hessian_eig = 0.0;
};

/// The cost is an exact quadratic J(u) = 1/2 u^T H u + f^T u + J(0) in flat
/// control coordinates. H and f come from cost() at 0, +-e_i and e_i + e_j;
/// the transposed entries use e_i - e_j instead, so their agreement checks
/// that the sampled function really is quadratic.
template <FilteredSpace Space>
DenseMinimizer brute_force_minimizer(const LQProblem<Space>& p) {
  require_consistent(p);
  const ControlLayout<Space> layout = control_layout(p);
  const Eigen::Index d = layout.size();
  if (d > oracle_capacity) {
    throw Error(ErrorCode::capacity, "dense oracle needs control dimension <= " + std::to_string(oracle_capacity) +
                                         ", got " + std::to_string(d));
  }
  auto J = [&](const Vector& v) { return cost(p, layout.unflatten(v)); };
  const double J0 = J(Vector::Zero(d));
  Vector plus(d);
  Vector minus(d);
  for (Eigen::Index i = 0; i < d; ++i) {
    plus(i) = J(Vector::Unit(d, i));
    minus(i) = J(-Vector::Unit(d, i));
  }
  Matrix H(d, d);
  Vector f(d);
  for (Eigen::Index i = 0; i < d; ++i) {
    H(i, i) = plus(i) + minus(i) - 2.0 * J0;
    f(i) = 0.5 * (plus(i) - minus(i));
  }
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = i + 1; j < d; ++j) {
      const Vector ei = Vector::Unit(d, i);
      const Vector ej = Vector::Unit(d, j);
      H(i, j) = J(ei + ej) - plus(i) - plus(j) + J0;
      H(j, i) = plus(i) + minus(j) - J(ei - ej) - J0;
    }
  }
  DenseMinimizer out;
  out.dim = d;
  const double scale = std::max(H.cwiseAbs().maxCoeff(), 1e-300);
  out.hessian_asymmetry = (H - H.transpose()).cwiseAbs().maxCoeff() / scale;
  const Matrix Hs = 0.5 * (H + H.transpose());
  out.min_hessian_eig = d > 0 ? Eigen::SelfAdjointEigenSolver<Matrix>(Hs, Eigen::EigenvaluesOnly).eigenvalues()(0) : 0.0;
  if (!(out.min_hessian_eig > 0.0)) {
    throw Error(ErrorCode::indefinite, "dense Hessian is not positive definite (min eigenvalue " +
                                           std::to_string(out.min_hessian_eig) + ")");
  }
  const Vector u = Hs.llt().solve(-f);
  out.u = layout.unflatten(u);
  out.cost = J(u);
  return out;
}

}  // namespace slq::io
