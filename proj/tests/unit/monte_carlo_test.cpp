#include <gtest/gtest.h>

#include <cmath>

#include "slq/slq.hpp"
#include "support/random_problem.hpp"

using namespace slq;

namespace {

std::shared_ptr<const MonteCarloSpace> ensemble(int K, std::size_t M, std::uint64_t seed) {
  return std::make_shared<const MonteCarloSpace>(make_grid(K, 0.0, 1.0), MCEnsembleOptions{M, seed, 2});
}

}  // namespace

TEST(MonteCarlo, Reproducible) {
  const auto a = ensemble(4, 200, 7);
  const auto b = ensemble(4, 200, 7);
  const auto c = ensemble(4, 200, 8);
  for (std::size_t j = 0; j < 200; ++j) EXPECT_EQ(a->increment(3, j), b->increment(3, j));
  EXPECT_NE(a->increment(3, 0), c->increment(3, 0));
  EXPECT_THROW(MonteCarloSpace(make_grid(2, 0.0, 1.0), MCEnsembleOptions{1, 1, 2}), Error);
}

TEST(MonteCarlo, RegressionReproducesBasisFunctions) {
  const auto s = ensemble(3, 500, 1);
  const auto W = brownian_path(*s);
  LevelValues<double> x;
  for (std::size_t j = 0; j < 500; ++j) x.push_back(1.0 + W(2, j) - 0.3 * W(2, j) * W(2, j));
  const auto e = s->conditional_expectation(1, x);
  // The level-2 value is not level-1 measurable, but constants are reproduced.
  const auto c = s->conditional_expectation(1, LevelValues<double>(500, 4.0));
  for (double v : c) EXPECT_NEAR(v, 4.0, 1e-12);
  EXPECT_EQ(e.size(), 500u);
}

TEST(MonteCarlo, BrownianRepresentationApproximate) {
  const auto s = ensemble(4, 4000, 3);
  const auto W = brownian_path(*s);
  const auto [m, Z] = s->martingale_representation(2, W.level(3));
  double err_m = 0.0;
  double err_z = 0.0;
  for (std::size_t j = 0; j < 4000; ++j) {
    err_m = std::max(err_m, std::abs(m[j] - W(2, j)));
    err_z += std::abs(Z[j] - 1.0) / 4000.0;
  }
  EXPECT_LE(err_m, 0.1);
  EXPECT_LE(err_z, 0.1);
}

TEST(MonteCarlo, MeanOfMultiplicativeNoise) {
  const auto s = ensemble(5, 4000, 5);
  auto p = heat_preset(s, 1, 1);
  p.A = SpectralOperator{Vector::Zero(1)};
  p.coeffs.C = constant_field<Matrix>(0, 4, Matrix::Ones(1, 1));
  p.eta = Vector::Ones(1);
  const StatePath x = solve_forward(p, zero_control(p));
  double mean = 0.0;
  double sq = 0.0;
  for (const auto& v : x.level(5)) {
    mean += v(0) / 4000.0;
    sq += v(0) * v(0) / 4000.0;
  }
  const double sd = std::sqrt(sq - mean * mean);
  EXPECT_LE(std::abs(mean - 1.0), 4.0 * sd / std::sqrt(4000.0));
}

TEST(MonteCarlo, DualityWithinStatisticalBound) {
  const auto s = ensemble(4, 2000, 11);
  fixtures::Sampler rng(2);
  fixtures::RandomOptions o;
  o.steps = 4;
  o.node_dependent = false;
  auto p = fixtures::random_problem(s, rng, o);
  TranspositionTest t;
  t.eta = {rng.vector(2, 1.0)};
  t.v1 = constant_field<Vector>(0, 3, rng.vector(2, 1.0));
  t.v2 = constant_field<Vector>(0, 3, rng.vector(2, 1.0));
  const auto W = brownian_path(*s);
  LevelValues<Vector> yT;
  for (std::size_t j = 0; j < 2000; ++j) yT.push_back(Vector::Constant(2, W(4, j)));
  const auto r = verify_transposition(p, yT, constant_field<Vector>(0, 3, Vector::Ones(2)), t);
  EXPECT_LE(r.relative, 0.1);
}
