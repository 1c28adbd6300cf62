#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "slq/slq.hpp"
#include "support/random_problem.hpp"

using namespace slq;

TEST(Semigroup, ScalarAndIdentity) {
  const SpectralOperator zero{Vector::Zero(2)};
  const Vector v = Vector::LinSpaced(2, 1.0, 2.0);
  EXPECT_EQ(semigroup_apply(zero, 0.7, v), v);
  const SpectralOperator minus_one{Vector::Constant(1, -1.0)};
  EXPECT_NEAR(semigroup_apply(minus_one, 1.0, Vector::Ones(1))(0), std::exp(-1.0), 1e-16);
  EXPECT_THROW(semigroup_apply(minus_one, -0.1, Vector::Ones(1)), Error);
}

TEST(Semigroup, LawAndContraction) {
  const SpectralOperator A = dirichlet_laplacian(4);
  const Vector v = Vector::LinSpaced(4, -1.0, 3.0);
  const Vector two = semigroup_apply(A, 0.01, semigroup_apply(A, 0.02, v));
  EXPECT_LE((two - semigroup_apply(A, 0.03, v)).norm(), 1e-15);
  EXPECT_LE(semigroup_apply(A, 0.05, v).norm(), v.norm());
}

TEST(Laplacian, Eigenvalues) {
  const double pi2 = std::numbers::pi * std::numbers::pi;
  EXPECT_NEAR(dirichlet_laplacian(1).eigenvalues(0), -pi2, 1e-12);
  const Vector l = dirichlet_laplacian(3).eigenvalues;
  EXPECT_NEAR(l(1), -4 * pi2, 1e-12);
  EXPECT_NEAR(l(2), -9 * pi2, 1e-12);
  EXPECT_THROW(dirichlet_laplacian(0), Error);
}

TEST(Validate, IdentityWeightsAreStandard) {
  auto space = std::make_shared<const TreeSpace>(build_tree(3, 0.0, 1.0));
  auto p = heat_preset(space, 2, 1);
  p.weights.G = constant_field<Matrix>(3, 3, Matrix::Identity(2, 2));
  const ValidationReport r = validate_conditions(p);
  EXPECT_TRUE(r.symmetric());
  EXPECT_TRUE(r.standard);
  EXPECT_NEAR(r.delta, 1.0, 1e-14);
}

TEST(Validate, NegativeRAtOneNode) {
  auto space = std::make_shared<const TreeSpace>(build_tree(3, 0.0, 1.0));
  auto p = heat_preset(space, 2, 1);
  p.weights.R = filled(*space, 0, 2, Matrix(Matrix::Identity(1, 1)));
  p.weights.R.at(2, 3)(0, 0) = -1.0;
  const ValidationReport r = validate_conditions(p);
  EXPECT_FALSE(r.standard);
  EXPECT_NEAR(r.delta, -1.0, 1e-14);
}

TEST(Validate, SkewIsListedAndNotSilentlyFixed) {
  auto space = std::make_shared<const TreeSpace>(build_tree(2, 0.0, 1.0));
  auto p = heat_preset(space, 2, 1);
  p.weights.Q.at(1, 0)(0, 1) += 1e-6;
  const ValidationReport first = validate_conditions(p);
  ASSERT_EQ(first.symmetry_violations.size(), 1u);
  EXPECT_NEAR(first.max_skew, 1e-6, 1e-12);
  const ValidationReport again = validate_conditions(p);
  EXPECT_EQ(again.symmetry_violations, first.symmetry_violations);
  symmetrize_weights(p);
  EXPECT_TRUE(validate_conditions(p).symmetric());
}

TEST(Validate, CrossTermUsesJointBlock) {
  auto space = std::make_shared<const TreeSpace>(build_tree(2, 0.0, 1.0));
  auto p = heat_preset(space, 1, 1);
  p.weights.Q = constant_field<Matrix>(0, 1, Matrix::Zero(1, 1));
  p.weights.S = constant_field<Matrix>(0, 1, Matrix::Ones(1, 1));
  EXPECT_FALSE(validate_conditions(p).standard);
  p.weights.Q = constant_field<Matrix>(0, 1, Matrix::Constant(1, 1, 1.0));
  EXPECT_TRUE(validate_conditions(p).standard);
}

TEST(Preset, Defaults) {
  auto space = std::make_shared<const TreeSpace>(build_tree(2, 0.0, 1.0));
  const auto p = heat_preset(space, 3, 2);
  EXPECT_EQ(p.state_dim(), 3);
  EXPECT_EQ(p.weights.R(0, 0), Matrix::Identity(2, 2));
  EXPECT_EQ(p.weights.Q(1, 1), Matrix::Identity(3, 3));
  EXPECT_NO_THROW(require_consistent(p));
  EXPECT_THROW(heat_preset(space, 0, 1), Error);
}

TEST(Problem, ShapeMismatchIsReported) {
  auto space = std::make_shared<const TreeSpace>(build_tree(2, 0.0, 1.0));
  auto p = heat_preset(space, 2, 1);
  p.coeffs.B = constant_field<Matrix>(0, 1, Matrix::Zero(3, 1));
  try {
    require_consistent(p);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::shape);
    EXPECT_NE(std::string(e.what()).find("B"), std::string::npos);
  }
}

TEST(Collapse, NoiseFreeDetection) {
  auto space = std::make_shared<const TreeSpace>(build_tree(3, 0.0, 1.0));
  fixtures::Sampler rng(3);
  auto p = fixtures::random_problem(space, rng);
  EXPECT_FALSE(is_noise_free(p));
  auto q = heat_preset(space, 2, 1);
  q.coeffs.B = constant_field<Matrix>(0, 2, Matrix::Ones(2, 1));
  EXPECT_TRUE(is_noise_free(q));
  const auto d = collapse(q);
  EXPECT_EQ(d.space->level_size(3), 1u);
}
