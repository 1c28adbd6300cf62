// Open-loop control of a noisy two-mode heat equation on the binomial tree.

#include <cstdio>
#include <memory>

#include "slq/slq.hpp"

int main() {
  using namespace slq;
  const int K = 6;
  auto space = std::make_shared<const TreeSpace>(build_tree(K, 0.0, 1.0));

  // Q = R = I on two Dirichlet modes; add actuation, a heat source, noise and a
  // terminal weight.
  LQProblem<TreeSpace> p = heat_preset(space, 2, 1);
  p.eta = Vector::Ones(2);
  p.coeffs.B = constant_field<Matrix>(0, K - 1, Matrix::Ones(2, 1));
  p.coeffs.b = constant_field<Vector>(0, K - 1, Vector::Constant(2, 10.0));
  p.coeffs.C = constant_field<Matrix>(0, K - 1, Matrix(0.3 * Matrix::Identity(2, 2)));
  p.coeffs.sigma = constant_field<Vector>(0, K - 1, Vector::Constant(2, 0.1));
  p.weights.G = constant_field<Matrix>(K, K, Matrix(5.0 * Matrix::Identity(2, 2)));

  const FinitenessReport f = check_finiteness(p);
  std::printf("Psi_1 spectrum [%.4f, %.4f] over %ld controls\n", f.min_eig, f.max_eig, static_cast<long>(f.dim));

  const OpenLoopSolution sol = solve_open_loop(p);
  std::printf("cost %.10f after %d iterations (%s), gradient %.2e\n", sol.diagnostics.cost,
              sol.diagnostics.iterations, sol.diagnostics.mode.c_str(), sol.diagnostics.gradient_norm);

  // The first control is deterministic; later ones react to the walk.
  std::printf("u(0) = %.6f\n", sol.u(0, 0)(0));
  std::printf("u(1) after up/down move: %.6f / %.6f\n", sol.u(1, 0)(0), sol.u(1, 1)(0));

  const double J0 = cost(p, zero_control(p));
  std::printf("uncontrolled cost %.10f\n", J0);
  return sol.diagnostics.converged() && sol.diagnostics.cost < J0 ? 0 : 1;
}
