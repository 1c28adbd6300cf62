#pragma once

// Two-person LQ stochastic differential games with open-loop strategies.
// Player indices are 0 and 1; `other(i)` is 1 - i. Each player's cost is
//   1/2 E[ sum dt ( <Q x,x> + s(<S_0 x,u_0> + <S_1 x,u_1>) + sum_ab <R_ab u_b, u_a>
//                   + 2<r_0,u_0> + 2<r_1,u_1> + 2<q,x> ) + <G x(T),x(T)> + 2<g,x(T)> ]
// with s the S factor (2 by default).

#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "slq/adapted.hpp"
#include "slq/backward.hpp"
#include "slq/error.hpp"
#include "slq/forward.hpp"
#include "slq/galerkin.hpp"
#include "slq/krylov.hpp"
#include "slq/lq_core.hpp"

namespace slq {

inline constexpr int other(int player) { return 1 - player; }

struct PlayerWeights {
  MatrixField Q;                             // N x N, levels 0..K-1
  std::array<MatrixField, 2> S;              // S[j]: m x N, pairs x with u_j
  std::array<std::array<MatrixField, 2>, 2>  // R[a][b]: m x m, <R[a][b] u_b, u_a>
      R;
  MatrixField G;                             // N x N, level K
  Process q;                                 // N
  std::array<Process, 2> r;                  // r[j]: m, pairs with u_j
  Process g;                                 // N, level K
};

template <FilteredSpace Space>
struct GameSpec {
  std::shared_ptr<const Space> space;
  SpectralOperator A;
  int control_dim = 1;
  MatrixField A1;
  MatrixField C;
  Process b;
  Process sigma;
  std::array<MatrixField, 2> B;
  std::array<MatrixField, 2> D;
  std::array<PlayerWeights, 2> players;
  int initial_level = 0;
  Vector eta;
  double s_factor = 2.0;

  int state_dim() const { return A.dim(); }
  int steps() const { return space->steps(); }
  double cross_weight() const { return 0.5 * s_factor; }
};

namespace detail {

/// Copy of `base` on levels 0..K-1 with `add(k, n)` added from `first` on.
template <FilteredSpace Space, class F>
Process shifted_field(const Space& space, const Process& base, int first, F&& add) {
  const int K = space.steps();
  Process out(0, K - 1);
  for (int k = 0; k < first; ++k) out.level(k) = base.level(k);
  for (int k = first; k < K; ++k) {
    auto& level = out.level(k);
    level.reserve(space.level_size(k));
    for (std::size_t n = 0; n < space.level_size(k); ++n) level.push_back(base(k, n) + add(k, n));
  }
  return out;
}

}  // namespace detail

template <FilteredSpace Space>
void require_consistent(const GameSpec<Space>& game) {
  if (!game.space) throw Error(ErrorCode::shape, "game has no probability space");
  const Space& s = *game.space;
  const int K = s.steps();
  const Eigen::Index N = game.state_dim();
  const Eigen::Index m = game.control_dim;
  if (N < 1 || m < 1) throw Error(ErrorCode::shape, "state and control dimensions must be >= 1");
  if (game.initial_level < 0 || game.initial_level >= K) throw Error(ErrorCode::shape, "initial level outside grid");
  if (game.eta.size() != N) throw Error(ErrorCode::shape, "initial state eta has wrong dimension");
  if (game.s_factor != 1.0 && game.s_factor != 2.0) throw Error(ErrorCode::domain, "S factor must be 1 or 2");
  detail::check_matrix_field(s, game.A1, 0, K - 1, N, N, "coefficients.A1");
  detail::check_matrix_field(s, game.C, 0, K - 1, N, N, "coefficients.C");
  detail::check_vector_field(s, game.b, 0, K - 1, N, "coefficients.b");
  detail::check_vector_field(s, game.sigma, 0, K - 1, N, "coefficients.sigma");
  for (int i = 0; i < 2; ++i) {
    const std::string tag = "player" + std::to_string(i + 1);
    detail::check_matrix_field(s, game.B[static_cast<std::size_t>(i)], 0, K - 1, N, m, "game.B" + std::to_string(i + 1));
    detail::check_matrix_field(s, game.D[static_cast<std::size_t>(i)], 0, K - 1, N, m, "game.D" + std::to_string(i + 1));
    const PlayerWeights& w = game.players[static_cast<std::size_t>(i)];
    detail::check_matrix_field(s, w.Q, 0, K - 1, N, N, tag + ".Q");
    detail::check_matrix_field(s, w.G, K, K, N, N, tag + ".G");
    detail::check_vector_field(s, w.q, 0, K - 1, N, tag + ".q");
    detail::check_vector_field(s, w.g, K, K, N, tag + ".g");
    for (int a = 0; a < 2; ++a) {
      const auto ua = static_cast<std::size_t>(a);
      detail::check_matrix_field(s, w.S[ua], 0, K - 1, m, N, tag + ".S" + std::to_string(a + 1));
      detail::check_vector_field(s, w.r[ua], 0, K - 1, m, tag + ".r" + std::to_string(a + 1));
      for (int bb = 0; bb < 2; ++bb) {
        detail::check_matrix_field(s, w.R[ua][static_cast<std::size_t>(bb)], 0, K - 1, m, m,
                                   tag + ".R" + std::to_string(a + 1) + std::to_string(bb + 1));
      }
    }
  }
}

/// Symmetry of Q^i, R^i_ab, G^i at every stored atom (tolerance 1e-12).
template <FilteredSpace Space>
std::vector<std::string> game_symmetry_violations(const GameSpec<Space>& game) {
  std::vector<std::string> out;
  auto check = [&](const MatrixField& f, const std::string& name) {
    for (int k = f.first_level(); k <= f.last_level(); ++k) {
      for (std::size_t n = 0; n < f.level(k).size(); ++n) {
        const Matrix& m = f.level(k)[n];
        const double skew = (m - m.transpose()).cwiseAbs().maxCoeff();
        if (skew > symmetry_tolerance) {
          std::ostringstream os;
          os << name << " level " << k << " node " << (f.level(k).size() == 1 ? std::string("*") : std::to_string(n))
             << ": skew " << skew;
          out.push_back(os.str());
        }
      }
    }
  };
  for (int i = 0; i < 2; ++i) {
    const auto& w = game.players[static_cast<std::size_t>(i)];
    const std::string tag = "player" + std::to_string(i + 1);
    check(w.Q, tag + ".Q");
    check(w.G, tag + ".G");
    for (int a = 0; a < 2; ++a) {
      for (int bb = 0; bb < 2; ++bb) {
        check(w.R[static_cast<std::size_t>(a)][static_cast<std::size_t>(bb)],
              tag + ".R" + std::to_string(a + 1) + std::to_string(bb + 1));
      }
    }
  }
  return out;
}

/// Relabels the players.
template <FilteredSpace Space>
GameSpec<Space> swap_players(const GameSpec<Space>& game) {
  GameSpec<Space> out = game;
  std::swap(out.B[0], out.B[1]);
  std::swap(out.D[0], out.D[1]);
  std::swap(out.players[0], out.players[1]);
  for (auto& w : out.players) {
    std::swap(w.S[0], w.S[1]);
    std::swap(w.r[0], w.r[1]);
    std::swap(w.R[0][0], w.R[1][1]);
    std::swap(w.R[0][1], w.R[1][0]);
  }
  return out;
}

/// Single-player problem of player i with the other control frozen: the
/// frozen control moves into b, sigma (through B_o, D_o), into q (through
/// S^i_o) and into r (through the cross weights); its pure cost terms become
/// the cost constant.
template <FilteredSpace Space>
LQProblem<Space> embed_player_problem(const GameSpec<Space>& game, int player, const ControlProcess& u_other) {
  require_consistent(game);
  const Space& s = *game.space;
  const int K = s.steps();
  const int first = game.initial_level;
  const auto i = static_cast<std::size_t>(player);
  const auto o = static_cast<std::size_t>(other(player));
  require_range(u_other, first, K - 1, "frozen control");
  require_atoms(s, u_other, "frozen control");
  const PlayerWeights& w = game.players[i];
  const double c = game.cross_weight();

  LQProblem<Space> p;
  p.space = game.space;
  p.A = game.A;
  p.control_dim = game.control_dim;
  p.initial_level = first;
  p.eta = game.eta;
  p.s_factor = game.s_factor;
  p.coeffs.A1 = game.A1;
  p.coeffs.C = game.C;
  p.coeffs.B = game.B[i];
  p.coeffs.D = game.D[i];
  p.coeffs.b = detail::shifted_field(s, game.b, first, [&](int k, std::size_t n) {
    return Vector(game.B[o](k, n) * u_other(k, n));
  });
  p.coeffs.sigma = detail::shifted_field(s, game.sigma, first, [&](int k, std::size_t n) {
    return Vector(game.D[o](k, n) * u_other(k, n));
  });
  p.weights.Q = w.Q;
  p.weights.R = w.R[i][i];
  p.weights.S = w.S[i];
  p.weights.G = w.G;
  p.weights.g = w.g;
  p.weights.q = detail::shifted_field(s, w.q, first, [&](int k, std::size_t n) {
    return Vector(c * (w.S[o](k, n).transpose() * u_other(k, n)));
  });
  p.weights.r = detail::shifted_field(s, w.r[i], first, [&](int k, std::size_t n) {
    return Vector(0.5 * (w.R[i][o](k, n) + w.R[o][i](k, n).transpose()) * u_other(k, n));
  });
  const Process pure = tabulate(s, first, K - 1, [&](int k, std::size_t n) {
    return Vector(0.5 * (w.R[o][o](k, n) * u_other(k, n)) + w.r[o](k, n));
  });
  p.cost_constant = pair_processes(s, pure, u_other);
  return p;
}

/// Cost J^i(u_0, u_1) evaluated directly from its definition.
template <FilteredSpace Space>
double player_cost(const GameSpec<Space>& game, int player, const ControlProcess& u0, const ControlProcess& u1) {
  require_consistent(game);
  const Space& s = *game.space;
  const int K = s.steps();
  const std::array<const ControlProcess*, 2> u{&u0, &u1};
  auto drift = [&](int k, std::size_t n, const Vector& x) {
    Vector out = game.A1(k, n) * x + game.b(k, n);
    for (std::size_t j = 0; j < 2; ++j) out.noalias() += game.B[j](k, n) * (*u[j])(k, n);
    return out;
  };
  auto diffusion = [&](int k, std::size_t n, const Vector& x) {
    Vector out = game.C(k, n) * x + game.sigma(k, n);
    for (std::size_t j = 0; j < 2; ++j) out.noalias() += game.D[j](k, n) * (*u[j])(k, n);
    return out;
  };
  const Process x = propagate(s, game.A, game.initial_level, LevelValues<Vector>{game.eta}, drift, diffusion);
  const PlayerWeights& w = game.players[static_cast<std::size_t>(player)];
  const double dt = s.grid().dt();
  double running = 0.0;
  for (int k = game.initial_level; k < K; ++k) {
    double level_sum = 0.0;
    for (std::size_t n = 0; n < s.level_size(k); ++n) {
      const Vector& xv = x(k, n);
      double v = xv.dot(w.Q(k, n) * xv) + 2.0 * w.q(k, n).dot(xv);
      for (std::size_t a = 0; a < 2; ++a) {
        const Vector& ua = (*u[a])(k, n);
        v += game.s_factor * ua.dot(w.S[a](k, n) * xv) + 2.0 * w.r[a](k, n).dot(ua);
        for (std::size_t bb = 0; bb < 2; ++bb) v += ua.dot(w.R[a][bb](k, n) * (*u[bb])(k, n));
      }
      level_sum += 0.5 * v;
    }
    running += dt * s.probability(k) * level_sum;
  }
  double terminal = 0.0;
  for (std::size_t j = 0; j < s.level_size(K); ++j) {
    const Vector& xv = x(K, j);
    terminal += 0.5 * xv.dot(w.G(K, j) * xv) + w.g(K, j).dot(xv);
  }
  return running + s.probability(K) * terminal;
}

/// Both players' stationarity expressions
///   B_i^T yhat_i + D_i^T Y_i + c S^i_i x + R^i_ii u_i + 1/2 (R^i_21 + R^i_12)^T u_o + r^i_i
/// along one forward solve with both controls and one backward solve per player
/// (source Q^i x + c S^i_0^T u_0 + c S^i_1^T u_1 + q^i, terminal G^i x(T) + g^i).
template <FilteredSpace Space>
std::array<ControlProcess, 2> nash_stationarity(const GameSpec<Space>& game, const ControlProcess& u0,
                                                const ControlProcess& u1) {
  const LQProblem<Space> joint = embed_player_problem(game, 0, u1);
  const Space& s = *game.space;
  const int first = game.initial_level;
  const int K = s.steps();
  const double c = game.cross_weight();
  const StatePath x = solve_forward(joint, u0);
  const std::array<const ControlProcess*, 2> u{&u0, &u1};
  std::array<ControlProcess, 2> out;
  for (std::size_t i = 0; i < 2; ++i) {
    const std::size_t o = 1 - i;
    const PlayerWeights& w = game.players[i];
    const Process xi = tabulate(s, first, K - 1, [&](int k, std::size_t n) {
      Vector v = w.Q(k, n) * x(k, n) + w.q(k, n);
      for (std::size_t a = 0; a < 2; ++a) v.noalias() += c * (w.S[a](k, n).transpose() * (*u[a])(k, n));
      return v;
    });
    LevelValues<Vector> yT;
    for (std::size_t j = 0; j < s.level_size(K); ++j) yT.push_back(w.G(K, j) * x(K, j) + w.g(K, j));
    const BackwardPair adj = solve_backward(joint, yT, xi);
    out[i] = tabulate(s, first, K - 1, [&](int k, std::size_t n) {
      Vector v = game.B[i](k, n).transpose() * adj.yhat(k, n);
      v.noalias() += game.D[i](k, n).transpose() * adj.Y(k, n);
      v.noalias() += c * (w.S[i](k, n) * x(k, n));
      v.noalias() += w.R[i][i](k, n) * (*u[i])(k, n);
      v.noalias() += 0.5 * (w.R[o][i](k, n) + w.R[i][o](k, n)).transpose() * (*u[o])(k, n);
      v += w.r[i](k, n);
      return v;
    });
  }
  return out;
}

struct ConvexityReport {
  bool convex = false;
  double min_eig = 0.0;
  std::string method;
};

/// Convexity of u_i -> J_0^i(t, 0; u_i): the homogeneous single-player
/// problem with B_i, D_i, Q^i, R^i_ii, S^i_i, G^i.
template <FilteredSpace Space>
ConvexityReport check_convexity_homogeneous(const GameSpec<Space>& game, int player,
                                            const FinitenessOptions& options = {}) {
  require_consistent(game);
  const ControlProcess zero = filled(*game.space, game.initial_level, game.steps() - 1,
                                     Vector(Vector::Zero(game.control_dim)));
  const FinitenessReport f = check_finiteness(homogeneous(embed_player_problem(game, player, zero)), options);
  return ConvexityReport{f.nonneg, f.min_eig, f.method};
}

class NoEquilibriumError : public Error {
 public:
  NoEquilibriumError(const std::string& what, ControlProcess u0, ControlProcess u1, double residual)
      : Error(ErrorCode::no_equilibrium, what), best_{std::move(u0), std::move(u1)}, residual_(residual) {}

  const std::array<ControlProcess, 2>& best_iterate() const { return best_; }
  double relative_residual() const { return residual_; }

 private:
  std::array<ControlProcess, 2> best_;
  double residual_;
};

struct NashOptions {
  double tolerance = 1e-10;
  int max_iter_factor = 10;
  int restart = 120;
  double certify_tolerance = 1e-8;
  FinitenessOptions finiteness{};
};

struct NashCandidate {
  std::array<ControlProcess, 2> u;
  std::array<double, 2> residual{};  // pair_processes norm of each stationarity expression
  std::array<ConvexityReport, 2> convexity{};
  std::string solver;  // "cg" or "gmres"
  int iterations = 0;
  double relative_residual = 0.0;
  bool certified = false;

  std::string label() const { return certified ? "Nash" : "stationary point (uncertified)"; }
};

/// The stationarity map (u_0, u_1) -> (g_0, g_1) is affine; its linear part is
/// solved by CG when it is self-adjoint in the stacked pairing and by
/// restarted GMRES otherwise.
template <FilteredSpace Space>
NashCandidate solve_nash(const GameSpec<Space>& game, const NashOptions& options = {}) {
  require_consistent(game);
  const Space& s = *game.space;
  const ControlLayout<Space> layout(s, game.initial_level, game.steps() - 1, game.control_dim);
  const Eigen::Index d = layout.size();
  const krylov::WeightedInner block = layout.inner();
  krylov::WeightedInner ip{Vector(2 * d)};
  ip.weights << block.weights, block.weights;

  auto residual_map = [&](const Vector& w) {
    const auto g = nash_stationarity(game, layout.unflatten(w.head(d)), layout.unflatten(w.tail(d)));
    Vector out(2 * d);
    out << layout.flatten(g[0]), layout.flatten(g[1]);
    return out;
  };
  const Vector offset = residual_map(Vector::Zero(2 * d));
  auto linear = [&](const Vector& w) { return Vector(residual_map(w) - offset); };
  const Vector rhs = -offset;

  // Self-adjointness probe on two seeded random directions.
  std::mt19937_64 rng(20240601);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector a(2 * d);
  Vector bvec(2 * d);
  for (Eigen::Index i = 0; i < 2 * d; ++i) {
    a(i) = normal(rng);
    bvec(i) = normal(rng);
  }
  const Vector La = linear(a);
  const Vector Lb = linear(bvec);
  const double lhs = ip(La, bvec);
  const double rhs_probe = ip(a, Lb);
  const bool self_adjoint =
      std::abs(lhs - rhs_probe) <= 1e-12 * (std::abs(lhs) + std::abs(rhs_probe) + ip.norm(La) * ip.norm(bvec));

  const int max_iter = options.max_iter_factor * static_cast<int>(std::max<Eigen::Index>(2 * d, 1));
  Vector w = Vector::Zero(2 * d);
  krylov::Result res;
  NashCandidate out;
  if (self_adjoint) {
    out.solver = "cg";
    res = krylov::conjugate_gradient(linear, rhs, w, ip, options.tolerance, max_iter);
  }
  if (!self_adjoint || !res.converged()) {
    out.solver = "gmres";
    w.setZero();
    res = krylov::gmres(linear, rhs, w, ip, options.tolerance, max_iter, options.restart);
  }
  out.u = {layout.unflatten(w.head(d)), layout.unflatten(w.tail(d))};
  out.iterations = res.iterations;
  out.relative_residual = res.relative_residual;
  if (!res.converged()) {
    throw NoEquilibriumError(std::string("Nash system did not converge (") + krylov::to_string(res.status) + ")",
                             out.u[0], out.u[1], res.relative_residual);
  }
  const auto g = nash_stationarity(game, out.u[0], out.u[1]);
  for (std::size_t i = 0; i < 2; ++i) {
    out.residual[i] = process_norm(s, g[i]);
    out.convexity[i] = check_convexity_homogeneous(game, static_cast<int>(i), options.finiteness);
  }
  out.certified = out.convexity[0].convex && out.convexity[1].convex &&
                  out.residual[0] <= options.certify_tolerance && out.residual[1] <= options.certify_tolerance;
  return out;
}

struct VerifyOptions {
  int deviations = 100;
  std::uint64_t seed = 42;
  double best_response_tolerance = 1e-7;
  double cost_tolerance = 1e-9;
  SolveOptions solve{};
};

struct PlayerVerification {
  double best_response_distance = 0.0;
  double equilibrium_cost = 0.0;
  double min_cost_change = 0.0;  // over the random unilateral deviations
  bool best_response_ok = false;
  bool deviations_ok = false;
};

struct NashVerification {
  std::array<PlayerVerification, 2> players{};
  bool passed = false;
};

/// Best-response and random-deviation checks of a candidate.
template <FilteredSpace Space>
NashVerification verify_nash(const GameSpec<Space>& game, const NashCandidate& candidate,
                             const VerifyOptions& options = {}) {
  require_consistent(game);
  const Space& s = *game.space;
  const ControlLayout<Space> layout(s, game.initial_level, game.steps() - 1, game.control_dim);
  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> magnitude(-3.0, 0.0);
  NashVerification out;
  out.passed = true;
  for (int i = 0; i < 2; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    PlayerVerification& pv = out.players[ui];
    const LQProblem<Space> embedded = embed_player_problem(game, i, candidate.u[1 - ui]);
    const OpenLoopSolution best = solve_open_loop(embedded, options.solve);
    pv.best_response_distance =
        process_norm(s, combine(s, 1.0, best.u, -1.0, candidate.u[ui]));
    pv.best_response_ok = pv.best_response_distance <= options.best_response_tolerance;

    auto cost_of = [&](const ControlProcess& mine) {
      return i == 0 ? player_cost(game, 0, mine, candidate.u[1]) : player_cost(game, 1, candidate.u[0], mine);
    };
    pv.equilibrium_cost = cost_of(candidate.u[ui]);
    pv.min_cost_change = std::numeric_limits<double>::infinity();
    for (int trial = 0; trial < options.deviations; ++trial) {
      Vector v(layout.size());
      for (Eigen::Index j = 0; j < v.size(); ++j) v(j) = normal(rng);
      v *= std::pow(10.0, magnitude(rng)) / layout.inner().norm(v);
      const ControlProcess deviated = combine(s, 1.0, candidate.u[ui], 1.0, layout.unflatten(v));
      pv.min_cost_change = std::min(pv.min_cost_change, cost_of(deviated) - pv.equilibrium_cost);
    }
    if (options.deviations == 0) pv.min_cost_change = 0.0;
    pv.deviations_ok = pv.min_cost_change >= -options.cost_tolerance;
    out.passed = out.passed && pv.best_response_ok && pv.deviations_ok;
  }
  return out;
}

}  // namespace slq
