#pragma once

// Discrete filtered probability spaces. The reference backend is a binary
// Rademacher tree on which conditional expectations and the martingale
// representation are exact. Levels are time indices k = 0..K; the values of an
// adapted quantity at level k live on the level-k atoms.

#include <cmath>
#include <concepts>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "slq/error.hpp"

namespace slq {

struct TimeGrid {
  double t0 = 0.0;
  double T = 1.0;
  int K = 1;

  double dt() const { return (T - t0) / K; }
  double time(int k) const { return t0 + k * dt(); }
};

inline TimeGrid make_grid(int K, double t0, double T) {
  if (K < 1) throw Error(ErrorCode::invalid_grid, "step count K must be >= 1, got " + std::to_string(K));
  if (!(T > t0)) throw Error(ErrorCode::invalid_grid, "horizon T must exceed t0");
  return TimeGrid{t0, T, K};
}

/// Operations every probability backend provides. `increment(k, j)` is the
/// Brownian increment over step k that lands on level-(k+1) atom j and
/// `parent(k, j)` is the level-k atom it descends from.
template <class S>
concept FilteredSpace = requires(const S& s, int k, std::size_t j) {
  { s.grid() } -> std::convertible_to<const TimeGrid&>;
  { s.steps() } -> std::convertible_to<int>;
  { s.level_size(k) } -> std::convertible_to<std::size_t>;
  { s.parent(k, j) } -> std::convertible_to<std::size_t>;
  { s.increment(k, j) } -> std::convertible_to<double>;
  { s.probability(k) } -> std::convertible_to<double>;
  { S::exact } -> std::convertible_to<bool>;
};

namespace detail {

template <class T>
void require_level_size(const std::vector<T>& values, std::size_t expected, int level) {
  if (values.size() != expected) {
    throw Error(ErrorCode::shape, "expected " + std::to_string(expected) + " values on level " +
                                      std::to_string(level) + ", got " + std::to_string(values.size()));
  }
}

}  // namespace detail

/// Symmetric binary random walk. Node n on level k has children 2n (increment
/// +sqrt(dt), "u") and 2n+1 (increment -sqrt(dt), "d"); every level-k atom
/// carries probability 2^-k.
class TreeSpace {
 public:
  static constexpr bool exact = true;
  static constexpr int max_steps = 24;

  explicit TreeSpace(TimeGrid grid) : grid_(grid), sqrt_dt_(std::sqrt(grid.dt())) {
    if (grid.K > max_steps) {
      throw Error(ErrorCode::capacity, "tree with K=" + std::to_string(grid.K) + " exceeds " +
                                           std::to_string(max_steps) + " levels");
    }
  }

  const TimeGrid& grid() const { return grid_; }
  int steps() const { return grid_.K; }
  double sqrt_dt() const { return sqrt_dt_; }

  std::size_t level_size(int k) const { return std::size_t{1} << k; }
  std::size_t leaf_count() const { return level_size(grid_.K); }
  std::size_t parent(int /*k*/, std::size_t child) const { return child >> 1; }
  double increment(int /*k*/, std::size_t child) const { return (child & 1U) ? -sqrt_dt_ : sqrt_dt_; }
  double probability(int k) const { return std::ldexp(1.0, -k); }

  /// Average over the two children of every level-k node.
  template <class T>
  std::vector<T> conditional_expectation(int k, const std::vector<T>& next) const {
    detail::require_level_size(next, level_size(k + 1), k + 1);
    std::vector<T> out;
    out.reserve(level_size(k));
    for (std::size_t n = 0; n < level_size(k); ++n) out.push_back(T((next[2 * n] + next[2 * n + 1]) * 0.5));
    return out;
  }

  /// X = E + Z dW_k exactly, with E the child average and Z the scaled child
  /// difference.
  template <class T>
  std::pair<std::vector<T>, std::vector<T>> martingale_representation(int k, const std::vector<T>& next) const {
    detail::require_level_size(next, level_size(k + 1), k + 1);
    std::vector<T> mean;
    std::vector<T> z;
    mean.reserve(level_size(k));
    z.reserve(level_size(k));
    const double scale = 0.5 / sqrt_dt_;
    for (std::size_t n = 0; n < level_size(k); ++n) {
      mean.push_back(T((next[2 * n] + next[2 * n + 1]) * 0.5));
      z.push_back(T((next[2 * n] - next[2 * n + 1]) * scale));
    }
    return {std::move(mean), std::move(z)};
  }

  /// Up/down path from the root, first step first ("" for the root).
  std::string path(int k, std::size_t node) const {
    std::string out(static_cast<std::size_t>(k), 'u');
    for (int i = 0; i < k; ++i) {
      if ((node >> (k - 1 - i)) & 1U) out[static_cast<std::size_t>(i)] = 'd';
    }
    return out;
  }

  std::optional<std::size_t> node_from_path(std::string_view p) const {
    if (p.size() > static_cast<std::size_t>(grid_.K)) return std::nullopt;
    std::size_t node = 0;
    for (char c : p) {
      if (c != 'u' && c != 'd') return std::nullopt;
      node = (node << 1) | (c == 'd' ? 1U : 0U);
    }
    return node;
  }

 private:
  TimeGrid grid_;
  double sqrt_dt_;
};

inline TreeSpace build_tree(int K, double t0, double T) { return TreeSpace(make_grid(K, t0, T)); }

/// One scenario per level with zero noise. Equivalent to the tree whenever the
/// data are deterministic and the diffusion coefficients vanish, in which case
/// every tree level is constant across its atoms.
class DeterministicSpace {
 public:
  static constexpr bool exact = true;

  explicit DeterministicSpace(TimeGrid grid) : grid_(grid) {}

  const TimeGrid& grid() const { return grid_; }
  int steps() const { return grid_.K; }
  std::size_t level_size(int /*k*/) const { return 1; }
  std::size_t parent(int /*k*/, std::size_t /*child*/) const { return 0; }
  double increment(int /*k*/, std::size_t /*child*/) const { return 0.0; }
  double probability(int /*k*/) const { return 1.0; }

  template <class T>
  std::vector<T> conditional_expectation(int k, const std::vector<T>& next) const {
    detail::require_level_size(next, 1, k + 1);
    return next;
  }

  template <class T>
  std::pair<std::vector<T>, std::vector<T>> martingale_representation(int k, const std::vector<T>& next) const {
    detail::require_level_size(next, 1, k + 1);
    return {next, std::vector<T>{T(next[0] * 0.0)}};
  }

 private:
  TimeGrid grid_;
};

}  // namespace slq
