#include <gtest/gtest.h>

#include <cmath>

#include "slq/slq.hpp"

using namespace slq;

TEST(Grid, RejectsBadGrids) {
  EXPECT_THROW(make_grid(0, 0.0, 1.0), Error);
  EXPECT_THROW(make_grid(4, 1.0, 1.0), Error);
  EXPECT_THROW(make_grid(4, 1.0, 0.5), Error);
  const TimeGrid g = make_grid(4, 0.0, 2.0);
  EXPECT_DOUBLE_EQ(g.dt(), 0.5);
  EXPECT_DOUBLE_EQ(g.time(3), 1.5);
}

TEST(Grid, ErrorCarriesKind) {
  try {
    make_grid(-1, 0.0, 1.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::invalid_grid);
  }
}

TEST(Tree, CapacityLimit) { EXPECT_THROW(build_tree(TreeSpace::max_steps + 1, 0.0, 1.0), Error); }

TEST(Tree, TerminalBrownianVariance) {
  for (int K : {1, 3, 6}) {
    const TreeSpace s = build_tree(K, 0.0, 1.0);
    const auto W = brownian_path(s);
    EXPECT_NEAR(pair_terminal(s, W.level(K), W.level(K)), 1.0, 1e-14);
    double mean = 0.0;
    for (double w : W.level(K)) mean += w * s.probability(K);
    EXPECT_NEAR(mean, 0.0, 1e-15);
  }
}

TEST(Tree, MartingaleRepresentationOfBrownianMotion) {
  const TreeSpace s = build_tree(5, 0.0, 1.0);
  const auto W = brownian_path(s);
  for (int k = 0; k < 5; ++k) {
    const auto [yhat, Z] = martingale_representation(s, k, W.level(k + 1));
    for (std::size_t n = 0; n < yhat.size(); ++n) {
      EXPECT_NEAR(yhat[n], W(k, n), 1e-14);
      EXPECT_NEAR(Z[n], 1.0, 1e-12);
    }
  }
}

TEST(Tree, RepresentationReconstructsChildren) {
  const TreeSpace s = build_tree(3, 0.0, 1.0);
  LevelValues<double> leaf{0.3, -1.2, 2.5, 0.0, 7.0, -3.0, 1.0, 4.0};
  const auto [m, Z] = martingale_representation(s, 2, leaf);
  for (std::size_t j = 0; j < leaf.size(); ++j) {
    const std::size_t n = s.parent(3, j);
    EXPECT_NEAR(m[n] + Z[n] * s.increment(3, j), leaf[j], 1e-14);
  }
  double total = 0.0;
  for (double v : leaf) total += v;
  auto e = leaf;
  for (int k = 2; k >= 0; --k) e = conditional_expectation(s, k, e);
  EXPECT_NEAR(e[0], total / 8.0, 1e-15);
}

TEST(Tree, PathStrings) {
  const TreeSpace s = build_tree(3, 0.0, 1.0);
  for (std::size_t n = 0; n < 8; ++n) EXPECT_EQ(s.node_from_path(s.path(3, n)).value(), n);
  EXPECT_EQ(s.path(2, 0), "uu");
  EXPECT_GT(s.increment(1, *s.node_from_path("u")), 0.0);
  EXPECT_LT(s.increment(1, *s.node_from_path("d")), 0.0);
  EXPECT_FALSE(s.node_from_path("ux").has_value());
}

TEST(Adapted, BroadcastAccess) {
  const TreeSpace s = build_tree(3, 0.0, 1.0);
  const Process c = constant_field<Vector>(0, 2, Vector::Ones(2));
  EXPECT_TRUE(c.broadcast(2));
  EXPECT_DOUBLE_EQ(c(2, 3)(1), 1.0);
  const Process full = filled(s, 0, 2, Vector(Vector::Ones(2)));
  EXPECT_NEAR(pair_processes(s, c, full), 2.0 * 1.0, 1e-14);
  EXPECT_THROW(require_range(c, 1, 2, "c"), Error);
}

TEST(Deterministic, MatchesTreeOnNoiseFreeData) {
  const DeterministicSpace d(make_grid(4, 0.0, 1.0));
  EXPECT_EQ(d.level_size(4), 1u);
  const auto [m, Z] = martingale_representation(d, 0, LevelValues<double>{2.0});
  EXPECT_DOUBLE_EQ(m[0], 2.0);
  EXPECT_DOUBLE_EQ(Z[0], 0.0);
}

TEST(Tree, SmallGrids) {
  const TreeSpace one = build_tree(1, 0.0, 1.0);
  EXPECT_EQ(one.leaf_count(), 2u);
  EXPECT_DOUBLE_EQ(one.increment(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(one.increment(0, 1), -1.0);
  const TreeSpace three = build_tree(3, 0.0, 1.0);
  EXPECT_DOUBLE_EQ(three.probability(3), 0.125);
  const TreeSpace half = build_tree(2, 0.0, 0.5);
  EXPECT_DOUBLE_EQ(std::abs(half.increment(1, 3)), 0.5);
}

TEST(Tree, IncrementMoments) {
  const TreeSpace s = build_tree(4, 0.0, 2.0);
  const double dt = s.grid().dt();
  for (int k = 0; k < 4; ++k) {
    LevelValues<double> dw;
    LevelValues<double> dw2;
    LevelValues<double> dw3;
    for (std::size_t j = 0; j < s.level_size(k + 1); ++j) {
      const double w = s.increment(k, j);
      dw.push_back(w);
      dw2.push_back(w * w);
      dw3.push_back(w * w * w);
    }
    for (double v : conditional_expectation(s, k, dw)) EXPECT_NEAR(v, 0.0, 1e-16);
    for (double v : conditional_expectation(s, k, dw2)) EXPECT_NEAR(v, dt, 1e-15);
    for (double v : conditional_expectation(s, k, dw3)) EXPECT_NEAR(v, 0.0, 1e-16);
    const auto [a, b] = martingale_representation(s, k, dw);
    for (std::size_t n = 0; n < a.size(); ++n) {
      EXPECT_NEAR(a[n], 0.0, 1e-16);
      EXPECT_NEAR(b[n], 1.0, 1e-14);
    }
  }
}

TEST(Tree, AffineRepresentationAndTower) {
  const TreeSpace s = build_tree(4, 0.0, 1.0);
  LevelValues<double> x;
  for (std::size_t j = 0; j < s.level_size(3); ++j) x.push_back(2.0 - 0.5 * s.increment(2, j));
  const auto [a, b] = martingale_representation(s, 2, x);
  for (std::size_t n = 0; n < a.size(); ++n) {
    EXPECT_NEAR(a[n], 2.0, 1e-15);
    EXPECT_NEAR(b[n], -0.5, 1e-14);
  }
  LevelValues<double> leaf;
  for (std::size_t j = 0; j < s.leaf_count(); ++j) leaf.push_back(std::sin(static_cast<double>(j)));
  const auto two = conditional_expectation(s, 2, conditional_expectation(s, 3, leaf));
  for (std::size_t n = 0; n < two.size(); ++n) {
    double avg = 0.0;
    for (std::size_t j = 4 * n; j < 4 * n + 4; ++j) avg += leaf[j] / 4.0;
    EXPECT_NEAR(two[n], avg, 1e-15);
  }
}

TEST(Pairing, ConstantsAndOrthogonality) {
  const TreeSpace s = build_tree(2, 0.0, 1.0);
  const Adapted<double> one = filled(s, 0, 1, 1.0);
  EXPECT_NEAR(pair_processes(s, one, one), 1.0, 1e-15);
  EXPECT_NEAR(pair_terminal(s, LevelValues<double>(4, 1.0), LevelValues<double>(4, 1.0)), 1.0, 1e-15);
  // A martingale increment is orthogonal to deterministic values at the next level.
  const Adapted<double> det = tabulate(s, 1, 1, [](int, std::size_t) { return 3.0; });
  const Adapted<double> inc = tabulate(s, 1, 1, [&](int, std::size_t n) { return s.increment(0, n); });
  EXPECT_NEAR(pair_processes(s, det, inc), 0.0, 1e-15);
  const Adapted<double> zero = filled(s, 0, 1, 0.0);
  EXPECT_EQ(pair_processes(s, zero, zero), 0.0);
}
