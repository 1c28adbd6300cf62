#pragma once

// Adapted processes indexed by (level, atom). A level may store a single value,
// which then applies to every atom of that level; coefficient tables that are
// constant or only time dependent use this to avoid per-node storage.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "slq/error.hpp"
#include "slq/tree.hpp"

namespace slq {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

template <class T>
using LevelValues = std::vector<T>;

template <class T>
class Adapted {
 public:
  Adapted() = default;
  Adapted(int first, int last) : first_(first), levels_(static_cast<std::size_t>(last - first + 1)) {
    if (last < first) throw Error(ErrorCode::shape, "empty level range");
  }

  int first_level() const { return first_; }
  int last_level() const { return first_ + static_cast<int>(levels_.size()) - 1; }
  bool empty() const { return levels_.empty(); }
  bool covers(int k) const { return !levels_.empty() && k >= first_ && k <= last_level(); }

  LevelValues<T>& level(int k) { return levels_[index(k)]; }
  const LevelValues<T>& level(int k) const { return levels_[index(k)]; }

  bool broadcast(int k) const { return level(k).size() == 1; }

  const T& operator()(int k, std::size_t n) const {
    const auto& values = level(k);
    return values.size() == 1 ? values[0] : values[n];
  }

  T& at(int k, std::size_t n) {
    auto& values = level(k);
    if (n >= values.size()) throw Error(ErrorCode::shape, "atom index out of range on level " + std::to_string(k));
    return values[n];
  }

 private:
  std::size_t index(int k) const {
    if (!covers(k)) throw Error(ErrorCode::shape, "level " + std::to_string(k) + " outside process range");
    return static_cast<std::size_t>(k - first_);
  }

  int first_ = 0;
  std::vector<LevelValues<T>> levels_;
};

using Process = Adapted<Vector>;
using MatrixField = Adapted<Matrix>;

/// Same value on every atom of levels first..last.
template <class T>
Adapted<T> constant_field(int first, int last, const T& value) {
  Adapted<T> out(first, last);
  for (int k = first; k <= last; ++k) out.level(k).assign(1, value);
  return out;
}

/// Full per-atom process built from f(k, n).
template <FilteredSpace Space, class F>
auto tabulate(const Space& space, int first, int last, F&& f) {
  using T = std::decay_t<decltype(f(first, std::size_t{0}))>;
  Adapted<T> out(first, last);
  for (int k = first; k <= last; ++k) {
    auto& values = out.level(k);
    const std::size_t count = space.level_size(k);
    values.reserve(count);
    for (std::size_t n = 0; n < count; ++n) values.push_back(f(k, n));
  }
  return out;
}

template <FilteredSpace Space, class T>
Adapted<T> filled(const Space& space, int first, int last, const T& value) {
  return tabulate(space, first, last, [&](int, std::size_t) { return value; });
}

/// Restriction of a process to levels first..last.
template <class T>
Adapted<T> slice(const Adapted<T>& x, int first, int last) {
  Adapted<T> out(first, last);
  for (int k = first; k <= last; ++k) out.level(k) = x.level(k);
  return out;
}

/// a*x + b*y over the full atom set.
template <FilteredSpace Space, class T>
Adapted<T> combine(const Space& space, double a, const Adapted<T>& x, double b, const Adapted<T>& y) {
  return tabulate(space, x.first_level(), x.last_level(),
                  [&](int k, std::size_t n) { return T(a * x(k, n) + b * y(k, n)); });
}

template <class T>
void require_range(const Adapted<T>& x, int first, int last, const std::string& name) {
  if (x.empty() || x.first_level() != first || x.last_level() != last) {
    throw Error(ErrorCode::shape, name + " must cover levels " + std::to_string(first) + ".." + std::to_string(last));
  }
}

template <FilteredSpace Space, class T>
void require_atoms(const Space& space, const Adapted<T>& x, const std::string& name) {
  for (int k = x.first_level(); k <= x.last_level(); ++k) {
    const auto size = x.level(k).size();
    if (size != 1 && size != space.level_size(k)) {
      throw Error(ErrorCode::shape, name + " has " + std::to_string(size) + " entries on level " + std::to_string(k) +
                                        ", expected 1 or " + std::to_string(space.level_size(k)));
    }
  }
}

namespace detail {

inline double inner(double a, double b) { return a * b; }
inline double inner(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw Error(ErrorCode::shape, "vector dimension mismatch in pairing");
  return a.dot(b);
}

}  // namespace detail

/// E sum_k dt <u_k, v_k> over the common level range. Summation runs over
/// levels then atoms in index order.
template <FilteredSpace Space, class T>
double pair_processes(const Space& space, const Adapted<T>& u, const Adapted<T>& v) {
  if (u.first_level() != v.first_level() || u.last_level() != v.last_level()) {
    throw Error(ErrorCode::shape, "paired processes cover different levels");
  }
  require_atoms(space, u, "left process");
  require_atoms(space, v, "right process");
  const double dt = space.grid().dt();
  double total = 0.0;
  for (int k = u.first_level(); k <= u.last_level(); ++k) {
    double level_sum = 0.0;
    for (std::size_t n = 0; n < space.level_size(k); ++n) level_sum += detail::inner(u(k, n), v(k, n));
    total += dt * space.probability(k) * level_sum;
  }
  return total;
}

template <FilteredSpace Space, class T>
double process_norm(const Space& space, const Adapted<T>& u) {
  return std::sqrt(pair_processes(space, u, u));
}

/// E <a, b> for values on a single level (size 1 entries broadcast).
template <FilteredSpace Space, class T>
double pair_level(const Space& space, int k, const LevelValues<T>& a, const LevelValues<T>& b) {
  const std::size_t count = space.level_size(k);
  for (const auto* values : {&a, &b}) {
    if (values->size() != 1 && values->size() != count) {
      throw Error(ErrorCode::shape, "level " + std::to_string(k) + " values have wrong atom count");
    }
  }
  double sum = 0.0;
  for (std::size_t n = 0; n < count; ++n) {
    sum += detail::inner(a.size() == 1 ? a[0] : a[n], b.size() == 1 ? b[0] : b[n]);
  }
  return space.probability(k) * sum;
}

/// E <xi, zeta> for terminal (leaf) values.
template <FilteredSpace Space, class T>
double pair_terminal(const Space& space, const LevelValues<T>& xi, const LevelValues<T>& zeta) {
  return pair_level(space, space.steps(), xi, zeta);
}

/// Mean of level-k values over the level's atoms.
template <FilteredSpace Space>
Vector level_mean(const Space& space, int k, const LevelValues<Vector>& values) {
  const std::size_t count = space.level_size(k);
  Vector sum = Vector::Zero(values.front().size());
  for (std::size_t n = 0; n < count; ++n) sum += values.size() == 1 ? values[0] : values[n];
  return sum * space.probability(k);
}

/// Brownian motion W(t_k) - W(t0) on every atom of levels 0..K.
template <FilteredSpace Space>
Adapted<double> brownian_path(const Space& space) {
  const int K = space.steps();
  Adapted<double> w(0, K);
  w.level(0).assign(space.level_size(0), 0.0);
  for (int k = 0; k < K; ++k) {
    auto& next = w.level(k + 1);
    next.resize(space.level_size(k + 1));
    for (std::size_t j = 0; j < next.size(); ++j) next[j] = w(k, space.parent(k, j)) + space.increment(k, j);
  }
  return w;
}

/// Level-k conditional expectation of level-(k+1) values.
template <FilteredSpace Space, class T>
LevelValues<T> conditional_expectation(const Space& space, int k, const LevelValues<T>& next) {
  return space.conditional_expectation(k, next);
}

/// (E, Z) with next = E + Z dW_k; exact on the tree, regression based for
/// Monte Carlo.
template <FilteredSpace Space, class T>
std::pair<LevelValues<T>, LevelValues<T>> martingale_representation(const Space& space, int k,
                                                                     const LevelValues<T>& next) {
  return space.martingale_representation(k, next);
}

}  // namespace slq
