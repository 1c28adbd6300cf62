#pragma once

// Matrix-free Krylov solvers on flat coefficient vectors with a diagonal
// weighted inner product <a, b>_w = sum_i w_i a_i b_i. Operators are callables
// Vector -> Vector that are self-adjoint in that inner product where required.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

namespace slq::krylov {

using Vector = Eigen::VectorXd;

struct WeightedInner {
  Vector weights;

  double operator()(const Vector& a, const Vector& b) const {
    return (weights.array() * a.array() * b.array()).sum();
  }
  double norm(const Vector& a) const { return std::sqrt(std::max(0.0, (*this)(a, a))); }
};

enum class Status { converged, max_iterations, negative_curvature, zero_curvature, breakdown };

inline const char* to_string(Status s) {
  switch (s) {
    case Status::converged: return "converged";
    case Status::max_iterations: return "max-iterations";
    case Status::negative_curvature: return "negative-curvature";
    case Status::zero_curvature: return "zero-curvature";
    case Status::breakdown: return "breakdown";
  }
  return "unknown";
}

struct Result {
  Status status = Status::max_iterations;
  int iterations = 0;
  double relative_residual = std::numeric_limits<double>::infinity();

  bool converged() const { return status == Status::converged; }
};

struct Identity {
  Vector operator()(const Vector& r) const { return r; }
};

/// Preconditioned conjugate gradient. x holds the initial guess on entry.
/// Stops on relative residual <= tol or on non-positive curvature.
template <class Op, class Precond = Identity>
Result conjugate_gradient(const Op& A, const Vector& b, Vector& x, const WeightedInner& ip, double tol, int max_iter,
                          const Precond& M = Precond{}) {
  Result res;
  const double b_norm = ip.norm(b);
  if (b_norm == 0.0) {
    x.setZero();
    res.status = Status::converged;
    res.relative_residual = 0.0;
    return res;
  }
  Vector r = b - A(x);
  res.relative_residual = ip.norm(r) / b_norm;
  if (res.relative_residual <= tol) {
    res.status = Status::converged;
    return res;
  }
  Vector z = M(r);
  Vector p = z;
  double rz = ip(r, z);
  double max_rayleigh = 0.0;
  for (int it = 1; it <= max_iter; ++it) {
    const Vector Ap = A(p);
    const double pAp = ip(p, Ap);
    const double pp = ip(p, p);
    const double rayleigh = pAp / pp;
    max_rayleigh = std::max(max_rayleigh, std::abs(rayleigh));
    res.iterations = it;
    if (rayleigh < -1e-12 * max_rayleigh) {
      res.status = Status::negative_curvature;
      return res;
    }
    if (rayleigh <= 1e-14 * max_rayleigh) {
      res.status = Status::zero_curvature;
      return res;
    }
    const double alpha = rz / pAp;
    x += alpha * p;
    r -= alpha * Ap;
    res.relative_residual = ip.norm(r) / b_norm;
    if (res.relative_residual <= tol) {
      // Confirm against the true residual to guard against recurrence drift.
      r = b - A(x);
      res.relative_residual = ip.norm(r) / b_norm;
      if (res.relative_residual <= tol) {
        res.status = Status::converged;
        return res;
      }
    }
    z = M(r);
    const double rz_next = ip(r, z);
    p = z + (rz_next / rz) * p;
    rz = rz_next;
  }
  res.status = Status::max_iterations;
  return res;
}

/// Minimal-norm least-squares solution of A x = b for self-adjoint positive
/// semidefinite A: CG on A^2 x = A b started from zero. The reported residual
/// is ||A(Ax - b)|| / ||A b||.
template <class Op>
Result conjugate_gradient_normal(const Op& A, const Vector& b, Vector& x, const WeightedInner& ip, double tol,
                                 int max_iter) {
  x.setZero();
  const Vector Ab = A(b);
  auto normal = [&](const Vector& v) { return A(A(v)); };
  Result res = conjugate_gradient(normal, Ab, x, ip, tol, max_iter);
  if (res.status == Status::zero_curvature) {
    // A^2 restricted to the Krylov space is exhausted; x is the projection.
    const double ab = ip.norm(Ab);
    res.relative_residual = ab > 0.0 ? ip.norm(Ab - normal(x)) / ab : 0.0;
    if (res.relative_residual <= std::sqrt(tol)) res.status = Status::converged;
  }
  return res;
}

/// Restarted GMRES in the weighted inner product.
template <class Op>
Result gmres(const Op& A, const Vector& b, Vector& x, const WeightedInner& ip, double tol, int max_iter,
             int restart = 60) {
  Result res;
  const double b_norm = ip.norm(b);
  if (b_norm == 0.0) {
    x.setZero();
    res.status = Status::converged;
    res.relative_residual = 0.0;
    return res;
  }
  int total = 0;
  while (total < max_iter) {
    Vector r = b - A(x);
    double beta = ip.norm(r);
    res.relative_residual = beta / b_norm;
    if (res.relative_residual <= tol) {
      res.status = Status::converged;
      res.iterations = total;
      return res;
    }
    const int m = std::min(restart, max_iter - total);
    std::vector<Vector> V;
    V.reserve(static_cast<std::size_t>(m) + 1);
    V.push_back(r / beta);
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(m + 1, m);
    Vector cs = Vector::Zero(m);
    Vector sn = Vector::Zero(m);
    Vector g = Vector::Zero(m + 1);
    g(0) = beta;
    int j = 0;
    bool happy = false;
    for (; j < m; ++j) {
      Vector w = A(V[static_cast<std::size_t>(j)]);
      for (int i = 0; i <= j; ++i) {
        H(i, j) = ip(w, V[static_cast<std::size_t>(i)]);
        w -= H(i, j) * V[static_cast<std::size_t>(i)];
      }
      // Second Gram-Schmidt pass keeps the basis orthogonal to working precision.
      for (int i = 0; i <= j; ++i) {
        const double h = ip(w, V[static_cast<std::size_t>(i)]);
        H(i, j) += h;
        w -= h * V[static_cast<std::size_t>(i)];
      }
      H(j + 1, j) = ip.norm(w);
      for (int i = 0; i < j; ++i) {
        const double t = cs(i) * H(i, j) + sn(i) * H(i + 1, j);
        H(i + 1, j) = -sn(i) * H(i, j) + cs(i) * H(i + 1, j);
        H(i, j) = t;
      }
      const double denom = std::hypot(H(j, j), H(j + 1, j));
      if (denom == 0.0) {
        res.status = Status::breakdown;
        break;
      }
      cs(j) = H(j, j) / denom;
      sn(j) = H(j + 1, j) / denom;
      const double hnext = H(j + 1, j);
      H(j, j) = denom;
      H(j + 1, j) = 0.0;
      g(j + 1) = -sn(j) * g(j);
      g(j) = cs(j) * g(j);
      ++total;
      res.relative_residual = std::abs(g(j + 1)) / b_norm;
      if (hnext <= 1e-300) happy = true;
      if (res.relative_residual <= tol || happy) {
        ++j;
        break;
      }
      V.push_back(w / hnext);
    }
    if (j > 0) {
      const Vector y = H.topLeftCorner(j, j).triangularView<Eigen::Upper>().solve(g.head(j));
      for (int i = 0; i < j; ++i) x += y(i) * V[static_cast<std::size_t>(i)];
    }
    if (res.status == Status::breakdown) break;
  }
  const Vector r = b - A(x);
  res.relative_residual = ip.norm(r) / b_norm;
  res.iterations = total;
  res.status = res.relative_residual <= tol ? Status::converged
                                            : (res.status == Status::breakdown ? Status::breakdown : Status::max_iterations);
  return res;
}

/// Smallest eigenvalue estimate of a self-adjoint operator by Lanczos with
/// full reorthogonalization from a seeded random start.
template <class Op>
double lanczos_min_eigenvalue(const Op& A, const WeightedInner& ip, int steps, std::uint64_t seed = 7) {
  const Eigen::Index dim = ip.weights.size();
  steps = static_cast<int>(std::min<Eigen::Index>(steps, dim));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector v(dim);
  for (Eigen::Index i = 0; i < dim; ++i) v(i) = normal(rng);
  v /= ip.norm(v);
  std::vector<Vector> basis{v};
  std::vector<double> alpha;
  std::vector<double> beta;
  for (int j = 0; j < steps; ++j) {
    Vector w = A(basis.back());
    alpha.push_back(ip(w, basis.back()));
    for (int pass = 0; pass < 2; ++pass) {
      for (const Vector& q : basis) w -= ip(w, q) * q;
    }
    const double b = ip.norm(w);
    if (j + 1 == steps || b <= 1e-12 * std::abs(alpha.back()) || b == 0.0) break;
    beta.push_back(b);
    basis.push_back(w / b);
  }
  const Eigen::Index n = static_cast<Eigen::Index>(alpha.size());
  Eigen::MatrixXd T = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    T(i, i) = alpha[static_cast<std::size_t>(i)];
    if (i + 1 < n) {
      T(i, i + 1) = beta[static_cast<std::size_t>(i)];
      T(i + 1, i) = beta[static_cast<std::size_t>(i)];
    }
  }
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(T, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
}

}  // namespace slq::krylov
