#pragma once

#include <memory>

#include "slq/slq.hpp"

namespace slq::fixtures {

using slq::random_control;
using slq::random_field;
using slq::random_game;
using slq::random_problem;
using slq::random_process;
using slq::RandomOptions;
using slq::Sampler;

/// Deterministic scalar problem: A = 0, B = 1, R = 1, G = 1, Q = 0, eta = 1 on
/// [0, 1]. Its continuous optimum is u = -1/2 with cost 1/4.
template <FilteredSpace Space>
LQProblem<Space> scalar_benchmark(std::shared_ptr<const Space> space) {
  const int K = space->steps();
  auto p = heat_preset(space, 1, 1);
  p.A = SpectralOperator{Vector::Zero(1)};
  p.coeffs.B = constant_field<Matrix>(0, K - 1, Matrix::Ones(1, 1));
  p.weights.Q = constant_field<Matrix>(0, K - 1, Matrix::Zero(1, 1));
  p.weights.G = constant_field<Matrix>(K, K, Matrix::Ones(1, 1));
  p.eta = Vector::Ones(1);
  return p;
}

}  // namespace slq::fixtures
