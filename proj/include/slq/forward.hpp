#pragma once

// Forward simulation of the controlled state equation by exponential
// Euler-Maruyama:
//   x_{k+1} = e^{A dt} [ x_k + (A1 x_k + B u_k + b_k) dt + (C x_k + D u_k + sigma_k) dW_k ].

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "slq/adapted.hpp"
#include "slq/galerkin.hpp"

namespace slq {

using StatePath = Process;
using ControlProcess = Process;

/// Generic one-step recursion shared by the state equation and the test
/// equations of the transposition identity. `drift(k, n, x)` and
/// `diffusion(k, n, x)` are evaluated once per level-k atom.
template <FilteredSpace Space, class Drift, class Diffusion>
Process propagate(const Space& space, const SpectralOperator& A, int first, const LevelValues<Vector>& start,
                  Drift&& drift, Diffusion&& diffusion) {
  const int K = space.steps();
  const double dt = space.grid().dt();
  const Vector semigroup = A.propagator(dt);
  Process x(first, K);
  {
    auto& level = x.level(first);
    const std::size_t atoms = space.level_size(first);
    if (start.size() != 1 && start.size() != atoms) throw Error(ErrorCode::shape, "initial values have wrong atom count");
    level.reserve(atoms);
    for (std::size_t n = 0; n < atoms; ++n) level.push_back(start.size() == 1 ? start[0] : start[n]);
  }
  std::vector<Vector> pre;
  std::vector<Vector> noise;
  for (int k = first; k < K; ++k) {
    const auto& cur = x.level(k);
    pre.resize(cur.size());
    noise.resize(cur.size());
    for (std::size_t n = 0; n < cur.size(); ++n) {
      pre[n] = cur[n] + drift(k, n, cur[n]) * dt;
      noise[n] = diffusion(k, n, cur[n]);
    }
    auto& next = x.level(k + 1);
    const std::size_t atoms = space.level_size(k + 1);
    next.resize(atoms);
    for (std::size_t j = 0; j < atoms; ++j) {
      const std::size_t n = space.parent(k, j);
      next[j] = semigroup.cwiseProduct(pre[n] + noise[n] * space.increment(k, j));
      if (!next[j].allFinite()) {
        throw Error(ErrorCode::numeric, "non-finite state at step " + std::to_string(k) + " -> level " +
                                            std::to_string(k + 1));
      }
    }
  }
  return x;
}

namespace detail {

template <FilteredSpace Space>
void require_control(const LQProblem<Space>& p, const ControlProcess& u, const std::string& name) {
  require_range(u, p.initial_level, p.steps() - 1, name);
  require_atoms(*p.space, u, name);
  for (int k = u.first_level(); k <= u.last_level(); ++k) {
    for (const Vector& v : u.level(k)) {
      if (v.size() != p.control_dim) throw Error(ErrorCode::shape, name + " has wrong control dimension");
    }
  }
}

}  // namespace detail

/// State path from initial value eta and control u (nullptr means u = 0);
/// b and sigma enter only when `with_inhomogeneous` is set.
template <FilteredSpace Space>
StatePath simulate(const LQProblem<Space>& p, const Vector& eta, const ControlProcess* u, bool with_inhomogeneous) {
  if (u) detail::require_control(p, *u, "control");
  if (eta.size() != p.state_dim()) throw Error(ErrorCode::shape, "initial state has wrong dimension");
  const auto& c = p.coeffs;
  auto drift = [&](int k, std::size_t n, const Vector& x) {
    Vector out = c.A1(k, n) * x;
    if (u) out.noalias() += c.B(k, n) * (*u)(k, n);
    if (with_inhomogeneous) out += c.b(k, n);
    return out;
  };
  auto diffusion = [&](int k, std::size_t n, const Vector& x) {
    Vector out = c.C(k, n) * x;
    if (u) out.noalias() += c.D(k, n) * (*u)(k, n);
    if (with_inhomogeneous) out += c.sigma(k, n);
    return out;
  };
  return propagate(*p.space, p.A, p.initial_level, LevelValues<Vector>{eta}, drift, diffusion);
}

template <FilteredSpace Space>
StatePath solve_forward(const LQProblem<Space>& p, const ControlProcess& u) {
  require_consistent(p);
  return simulate(p, p.eta, &u, true);
}

/// x = M u + N eta + h, each part from its own forward solve.
struct LinearDecomposition {
  StatePath control;
  StatePath initial;
  StatePath inhomogeneous;
};

template <FilteredSpace Space>
LinearDecomposition decompose_linear(const LQProblem<Space>& p, const ControlProcess& u) {
  require_consistent(p);
  const Vector zero = Vector::Zero(p.state_dim());
  return LinearDecomposition{simulate(p, zero, &u, false), simulate(p, p.eta, nullptr, false),
                             simulate(p, zero, nullptr, true)};
}

struct AprioriResult {
  bool degenerate = false;
  double ratio = 0.0;
  double state_sup = 0.0;  // max over levels of sqrt(E|x_k|^2)
  double data_norm = 0.0;  // |eta| + ||u|| + ||b|| + ||sigma||
};

/// Size of the state relative to the size of its data.
template <FilteredSpace Space>
AprioriResult apriori_check(const LQProblem<Space>& p, const ControlProcess& u) {
  const StatePath x = solve_forward(p, u);
  const Space& s = *p.space;
  const int first = p.initial_level;
  const int last = p.steps() - 1;
  AprioriResult out;
  out.data_norm = p.eta.norm() + process_norm(s, u) + process_norm(s, slice(p.coeffs.b, first, last)) +
                  process_norm(s, slice(p.coeffs.sigma, first, last));
  for (int k = first; k <= p.steps(); ++k) {
    out.state_sup = std::max(out.state_sup, std::sqrt(pair_level(s, k, x.level(k), x.level(k))));
  }
  if (out.data_norm == 0.0) {
    out.degenerate = true;
    return out;
  }
  out.ratio = out.state_sup / out.data_norm;
  return out;
}

}  // namespace slq
