#pragma once

// Seeded random instances: standard-condition problems and convex games.

#include <Eigen/Cholesky>

#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <random>

#include "slq/adapted.hpp"
#include "slq/forward.hpp"
#include "slq/galerkin.hpp"
#include "slq/game.hpp"

namespace slq {

struct RandomOptions {
  int steps = 3;
  int state_dim = 2;
  int control_dim = 1;
  int initial_level = 0;
  double T = 1.0;
  bool node_dependent = true;  // coefficients vary over atoms
  bool cross_term = true;      // S != 0
  double scale = 0.4;
};

class Sampler {
 public:
  explicit Sampler(std::uint64_t seed) : rng_(seed) {}

  double normal() { return normal_(rng_); }

  Matrix matrix(Eigen::Index rows, Eigen::Index cols, double scale) {
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * normal();
    return m;
  }

  Vector vector(Eigen::Index n, double scale) {
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = scale * normal();
    return v;
  }

  Matrix spd(Eigen::Index n, double floor) {
    const Matrix a = matrix(n, n, 1.0 / std::sqrt(static_cast<double>(n)));
    return a * a.transpose() + floor * Matrix::Identity(n, n);
  }

  Matrix psd(Eigen::Index n) {
    const Matrix a = matrix(n, 1, 1.0);
    return a * a.transpose();
  }

  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

template <FilteredSpace Space, class F>
MatrixField random_field(const Space& space, int first, int last, bool per_atom, F&& make) {
  if (!per_atom) {
    MatrixField out(first, last);
    for (int k = first; k <= last; ++k) out.level(k).push_back(make());
    return out;
  }
  return tabulate(space, first, last, [&](int, std::size_t) { return Matrix(make()); });
}

template <FilteredSpace Space, class F>
Process random_process(const Space& space, int first, int last, bool per_atom, F&& make) {
  if (!per_atom) {
    Process out(first, last);
    for (int k = first; k <= last; ++k) out.level(k).push_back(make());
    return out;
  }
  return tabulate(space, first, last, [&](int, std::size_t) { return Vector(make()); });
}

/// Standard-condition problem with random coefficients: Q, G positive
/// semidefinite, R uniformly positive definite, and, when S != 0, the joint
/// block [[Q, cS^T], [cS, R]] kept positive semidefinite by construction.
template <FilteredSpace Space>
LQProblem<Space> random_problem(std::shared_ptr<const Space> space, Sampler& rng, const RandomOptions& o = {}) {
  const int K = space->steps();
  const int N = o.state_dim;
  const int m = o.control_dim;
  // Per-atom data is only adapted on exact spaces; on path ensembles an atom
  // is a whole path.
  const bool pa = o.node_dependent && Space::exact;
  LQProblem<Space> p;
  p.space = space;
  Vector eig(N);
  for (int i = 0; i < N; ++i) eig(i) = -(1.0 + i) * (1.0 + i);
  p.A = SpectralOperator{eig};
  p.control_dim = m;
  p.initial_level = o.initial_level;
  p.eta = rng.vector(N, 1.0);
  const Space& s = *space;
  p.coeffs.A1 = random_field(s, 0, K - 1, pa, [&] { return rng.matrix(N, N, o.scale); });
  p.coeffs.B = random_field(s, 0, K - 1, pa, [&] { return rng.matrix(N, m, 1.0); });
  p.coeffs.C = random_field(s, 0, K - 1, pa, [&] { return rng.matrix(N, N, o.scale); });
  p.coeffs.D = random_field(s, 0, K - 1, pa, [&] { return rng.matrix(N, m, o.scale); });
  p.coeffs.b = random_process(s, 0, K - 1, pa, [&] { return rng.vector(N, o.scale); });
  p.coeffs.sigma = random_process(s, 0, K - 1, pa, [&] { return rng.vector(N, o.scale); });

  const double c = p.cross_weight();
  MatrixField Q(0, K - 1);
  MatrixField R(0, K - 1);
  MatrixField S(0, K - 1);
  for (int k = 0; k < K; ++k) {
    const std::size_t atoms = pa ? s.level_size(k) : 1;
    for (std::size_t n = 0; n < atoms; ++n) {
      const Matrix Rk = rng.spd(m, 0.5);
      Matrix Sk = Matrix::Zero(m, N);
      Matrix Qk = rng.spd(N, 0.1);
      if (o.cross_term) {
        // Q - c^2 S^T R^{-1} S >= 0 keeps the joint block semidefinite.
        Sk = rng.matrix(m, N, 0.3);
        const Matrix schur = c * c * Sk.transpose() * Rk.llt().solve(Sk);
        Qk += schur;
        Qk = 0.5 * (Qk + Qk.transpose()).eval();
      }
      Q.level(k).push_back(Qk);
      R.level(k).push_back(Rk);
      S.level(k).push_back(Sk);
    }
  }
  p.weights.Q = std::move(Q);
  p.weights.R = std::move(R);
  p.weights.S = std::move(S);
  p.weights.G = random_field(s, K, K, pa, [&] { return rng.psd(N); });
  p.weights.q = random_process(s, 0, K - 1, pa, [&] { return rng.vector(N, 1.0); });
  p.weights.r = random_process(s, 0, K - 1, pa, [&] { return rng.vector(m, 1.0); });
  p.weights.g = random_process(s, K, K, pa, [&] { return rng.vector(N, 1.0); });
  return p;
}

/// Random adapted process with `dim` components on levels first..last: free
/// values per atom on exact spaces, an affine function of the running
/// Brownian value on path ensembles.
template <FilteredSpace Space>
Process random_adapted(const Space& s, int first, int last, Eigen::Index dim, Sampler& rng) {
  if constexpr (Space::exact) {
    return tabulate(s, first, last, [&](int, std::size_t) { return Vector(rng.vector(dim, 1.0)); });
  } else {
    const auto W = brownian_path(s);
    std::vector<std::pair<Vector, Vector>> coef;
    for (int k = first; k <= last; ++k) coef.emplace_back(rng.vector(dim, 1.0), rng.vector(dim, 1.0));
    return tabulate(s, first, last, [&](int k, std::size_t n) {
      const auto& [a, b] = coef[static_cast<std::size_t>(k - first)];
      return Vector(a + W(k, n) * b);
    });
  }
}

template <FilteredSpace Space>
ControlProcess random_control(const LQProblem<Space>& p, Sampler& rng) {
  return random_adapted(*p.space, p.initial_level, p.steps() - 1, p.control_dim, rng);
}

/// Random two-player game; each player's own block is a standard-condition
/// problem and the cross weights are symmetric.
template <FilteredSpace Space>
GameSpec<Space> random_game(std::shared_ptr<const Space> space, Sampler& rng, const RandomOptions& o = {}) {
  const int K = space->steps();
  const auto base0 = random_problem(space, rng, o);
  const auto base1 = random_problem(space, rng, o);
  GameSpec<Space> g;
  g.space = space;
  g.A = base0.A;
  g.control_dim = o.control_dim;
  g.A1 = base0.coeffs.A1;
  g.C = base0.coeffs.C;
  g.b = base0.coeffs.b;
  g.sigma = base0.coeffs.sigma;
  g.B = {base0.coeffs.B, base1.coeffs.B};
  g.D = {base0.coeffs.D, base1.coeffs.D};
  g.initial_level = o.initial_level;
  g.eta = base0.eta;
  const Space& s = *space;
  const int m = o.control_dim;
  const std::array<const LQProblem<Space>*, 2> bases{&base0, &base1};
  for (std::size_t i = 0; i < 2; ++i) {
    const std::size_t j = 1 - i;
    PlayerWeights& w = g.players[i];
    const auto& own = bases[i]->weights;
    w.Q = own.Q;
    w.G = own.G;
    w.q = own.q;
    w.g = own.g;
    w.S[i] = own.S;
    w.S[j] = random_field(s, 0, K - 1, false, [&] { return rng.matrix(m, o.state_dim, o.cross_term ? 0.2 : 0.0); });
    w.r[i] = own.r;
    w.r[j] = random_process(s, 0, K - 1, false, [&] { return rng.vector(m, 0.5); });
    w.R[i][i] = own.R;
    w.R[j][j] = random_field(s, 0, K - 1, false, [&] { return rng.spd(m, 0.1); });
    const MatrixField cross = random_field(s, 0, K - 1, false, [&] {
      const Matrix a = rng.matrix(m, m, 0.2);
      return Matrix(a + a.transpose());
    });
    w.R[i][j] = cross;
    w.R[j][i] = cross;
  }
  return g;
}

}  // namespace slq
