#pragma once

// Backward recursion for the adjoint equation
//   dy = -[(A + A1)^* y + C^* Y + xi] ds + Y dW,  y(T) = y_T,
// built as the algebraic adjoint of the forward scheme. With
// P_k = e^{A dt} y_{k+1}:
//   yhat_k = E_k[P_k],  Y_k = E_k[P_k dW_k] / dt,
//   y_k    = yhat_k + dt (A1_k^T yhat_k + C_k^T Y_k + xi_k).
// The forward/backward pairing then telescopes exactly on the tree.

#include <cmath>
#include <string>
#include <utility>

#include "slq/adapted.hpp"
#include "slq/forward.hpp"
#include "slq/galerkin.hpp"

namespace slq {

struct BackwardPair {
  Process y;     // levels first..K
  Process Y;     // levels first..K-1
  Process yhat;  // levels first..K-1, pre-drift adjoint
};

/// `generator(k, n, yhat, Y)` returns the dt-coefficient added to yhat.
template <FilteredSpace Space, class Generator>
BackwardPair backpropagate(const Space& space, const SpectralOperator& A, int first, const LevelValues<Vector>& terminal,
                           Generator&& generator) {
  const int K = space.steps();
  const double dt = space.grid().dt();
  const Vector semigroup = A.propagator(dt);
  BackwardPair out{Process(first, K), Process(first, K - 1), Process(first, K - 1)};
  {
    const std::size_t leaves = space.level_size(K);
    if (terminal.size() != 1 && terminal.size() != leaves) {
      throw Error(ErrorCode::shape, "terminal datum has wrong atom count");
    }
    auto& level = out.y.level(K);
    level.reserve(leaves);
    for (std::size_t j = 0; j < leaves; ++j) level.push_back(terminal.size() == 1 ? terminal[0] : terminal[j]);
  }
  std::vector<Vector> propagated;
  for (int k = K - 1; k >= first; --k) {
    const auto& next = out.y.level(k + 1);
    propagated.resize(next.size());
    for (std::size_t j = 0; j < next.size(); ++j) propagated[j] = semigroup.cwiseProduct(next[j]);
    auto [yhat, Z] = space.martingale_representation(k, propagated);
    auto& y = out.y.level(k);
    y.resize(yhat.size());
    for (std::size_t n = 0; n < yhat.size(); ++n) {
      y[n] = yhat[n] + dt * generator(k, n, yhat[n], Z[n]);
      if (!y[n].allFinite()) throw Error(ErrorCode::numeric, "non-finite adjoint on level " + std::to_string(k));
    }
    out.yhat.level(k) = std::move(yhat);
    out.Y.level(k) = std::move(Z);
  }
  return out;
}

namespace detail {

template <FilteredSpace Space>
void require_state_source(const LQProblem<Space>& p, const Process& xi, const std::string& name) {
  require_range(xi, p.initial_level, p.steps() - 1, name);
  require_atoms(*p.space, xi, name);
  for (int k = xi.first_level(); k <= xi.last_level(); ++k) {
    for (const Vector& v : xi.level(k)) {
      if (v.size() != p.state_dim()) throw Error(ErrorCode::shape, name + " has wrong state dimension");
    }
  }
}

template <FilteredSpace Space>
void require_terminal(const LQProblem<Space>& p, const LevelValues<Vector>& yT, const std::string& name) {
  const std::size_t leaves = p.space->level_size(p.steps());
  if (yT.size() != 1 && yT.size() != leaves) throw Error(ErrorCode::shape, name + " has wrong leaf count");
  for (const Vector& v : yT) {
    if (v.size() != p.state_dim()) throw Error(ErrorCode::shape, name + " has wrong state dimension");
  }
}

}  // namespace detail

template <FilteredSpace Space>
BackwardPair solve_backward(const LQProblem<Space>& p, const LevelValues<Vector>& yT, const Process& xi) {
  detail::require_terminal(p, yT, "terminal datum");
  detail::require_state_source(p, xi, "source xi");
  const auto& c = p.coeffs;
  return backpropagate(*p.space, p.A, p.initial_level, yT, [&](int k, std::size_t n, const Vector& yhat, const Vector& Y) {
    Vector out = c.A1(k, n).transpose() * yhat;
    out.noalias() += c.C(k, n).transpose() * Y;
    out += xi(k, n);
    return out;
  });
}

/// Data of the test equation d phi = (A phi + v1) ds + v2 dW, phi(t) = eta.
struct TranspositionTest {
  LevelValues<Vector> eta;  // on the initial level (size 1 broadcasts)
  Process v1;
  Process v2;
};

struct TranspositionResidual {
  double lhs = 0.0;
  double rhs = 0.0;
  double absolute = 0.0;
  double relative = 0.0;
};

/// Discrete transposition identity
///   E<phi(T), y_T> - sum dt E<phi, f> = E<eta, y(t)> + sum dt E[<v1, yhat> + <v2, Y>]
/// with f = -A1^T yhat - C^T Y - xi.
template <FilteredSpace Space>
TranspositionResidual verify_transposition(const LQProblem<Space>& p, const LevelValues<Vector>& yT, const Process& xi,
                                           const TranspositionTest& test) {
  require_consistent(p);
  detail::require_state_source(p, test.v1, "test drift v1");
  detail::require_state_source(p, test.v2, "test diffusion v2");
  const Space& s = *p.space;
  const int first = p.initial_level;
  const int K = p.steps();
  const BackwardPair adj = solve_backward(p, yT, xi);
  const Process phi = propagate(
      s, p.A, first, test.eta, [&](int k, std::size_t n, const Vector&) { return test.v1(k, n); },
      [&](int k, std::size_t n, const Vector&) { return test.v2(k, n); });
  const auto& c = p.coeffs;
  const Process f = tabulate(s, first, K - 1, [&](int k, std::size_t n) {
    Vector out = -(c.A1(k, n).transpose() * adj.yhat(k, n));
    out.noalias() -= c.C(k, n).transpose() * adj.Y(k, n);
    out -= xi(k, n);
    return out;
  });
  const double terminal = pair_terminal(s, phi.level(K), adj.y.level(K));
  const double source = pair_processes(s, slice(phi, first, K - 1), f);
  const double initial = pair_level(s, first, test.eta, adj.y.level(first));
  const double drift = pair_processes(s, test.v1, adj.yhat);
  const double diffusion = pair_processes(s, test.v2, adj.Y);

  TranspositionResidual out;
  out.lhs = terminal - source;
  out.rhs = initial + drift + diffusion;
  out.absolute = std::abs(out.lhs - out.rhs);
  const double scale =
      std::abs(terminal) + std::abs(source) + std::abs(initial) + std::abs(drift) + std::abs(diffusion);
  out.relative = scale > 0.0 ? out.absolute / scale : 0.0;
  return out;
}

}  // namespace slq
