// Open-loop Nash equilibrium of a random two-player game.

#include <cstdio>
#include <memory>

#include "slq/slq.hpp"

int main() {
  using namespace slq;
  const int K = 4;
  auto space = std::make_shared<const TreeSpace>(build_tree(K, 0.0, 1.0));
  Sampler rng(2024);
  RandomOptions o;
  o.steps = K;
  const GameSpec<TreeSpace> game = random_game(space, rng, o);

  const NashCandidate c = solve_nash(game);
  std::printf("%s via %s in %d iterations\n", c.label().c_str(), c.solver.c_str(), c.iterations);
  for (int i = 0; i < 2; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    std::printf("player %d: stationarity %.2e, convexity margin %.4f, cost %.8f\n", i + 1, c.residual[ui],
                c.convexity[ui].min_eig, player_cost(game, i, c.u[0], c.u[1]));
  }

  const NashVerification v = verify_nash(game, c);
  std::printf("best responses within %.2e / %.2e, unilateral deviations never pay: %s\n",
              v.players[0].best_response_distance, v.players[1].best_response_distance,
              v.players[0].deviations_ok && v.players[1].deviations_ok ? "yes" : "no");
  return v.passed ? 0 : 1;
}
