#pragma once

// Monte Carlo backend: M independent Gaussian paths, conditional expectations
// by least-squares regression on Hermite polynomials of the running Brownian
// value. Identities that are exact on the tree hold only approximately here.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <type_traits>
#include <utility>
#include <vector>

#include "slq/error.hpp"
#include "slq/tree.hpp"

namespace slq {

struct MCEnsembleOptions {
  std::size_t paths = 1000;
  std::uint64_t seed = 1;
  int basis_degree = 2;
};

class MonteCarloSpace {
 public:
  static constexpr bool exact = false;

  MonteCarloSpace(TimeGrid grid, MCEnsembleOptions options) : grid_(grid), options_(options) {
    if (options.paths < 2) throw Error(ErrorCode::domain, "Monte Carlo backend needs at least 2 paths");
    if (options.basis_degree < 0) throw Error(ErrorCode::domain, "regression basis degree must be >= 0");
    const std::size_t M = options.paths;
    const double sqrt_dt = std::sqrt(grid.dt());
    std::mt19937_64 rng(options.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    increments_.assign(static_cast<std::size_t>(grid.K), std::vector<double>(M));
    // Path-major draw order so that adding steps never reshuffles earlier paths.
    for (std::size_t j = 0; j < M; ++j) {
      for (int k = 0; k < grid.K; ++k) increments_[static_cast<std::size_t>(k)][j] = sqrt_dt * normal(rng);
    }
    std::vector<double> w(M, 0.0);
    for (int k = 0; k < grid.K; ++k) {
      build_basis(k, w);
      for (std::size_t j = 0; j < M; ++j) w[j] += increments_[static_cast<std::size_t>(k)][j];
    }
  }

  const TimeGrid& grid() const { return grid_; }
  const MCEnsembleOptions& options() const { return options_; }
  int steps() const { return grid_.K; }
  std::size_t level_size(int /*k*/) const { return options_.paths; }
  std::size_t parent(int /*k*/, std::size_t child) const { return child; }
  double increment(int k, std::size_t child) const { return increments_[static_cast<std::size_t>(k)][child]; }
  double probability(int /*k*/) const { return 1.0 / static_cast<double>(options_.paths); }

  template <class T>
  std::vector<T> conditional_expectation(int k, const std::vector<T>& next) const {
    detail::require_level_size(next, options_.paths, k + 1);
    return unpack<T>(project(k, pack(next)), next.front());
  }

  template <class T>
  std::pair<std::vector<T>, std::vector<T>> martingale_representation(int k, const std::vector<T>& next) const {
    detail::require_level_size(next, options_.paths, k + 1);
    Eigen::MatrixXd values = pack(next);
    Eigen::MatrixXd weighted = values;
    const auto& dw = increments_[static_cast<std::size_t>(k)];
    for (std::size_t j = 0; j < options_.paths; ++j) weighted.row(static_cast<Eigen::Index>(j)) *= dw[j];
    Eigen::MatrixXd z = project(k, weighted) / grid_.dt();
    return {unpack<T>(project(k, values), next.front()), unpack<T>(z, next.front())};
  }

 private:
  struct LevelBasis {
    Eigen::MatrixXd phi;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr;
  };

  void build_basis(int k, const std::vector<double>& w) {
    const std::size_t M = options_.paths;
    const int degree = k == 0 ? 0 : options_.basis_degree;
    const double scale = k == 0 ? 1.0 : 1.0 / std::sqrt(grid_.time(k) - grid_.t0);
    Eigen::MatrixXd phi(static_cast<Eigen::Index>(M), degree + 1);
    for (std::size_t j = 0; j < M; ++j) {
      const double z = w[j] * scale;
      // Probabilists' Hermite recursion He_{n+1} = z He_n - n He_{n-1}.
      double prev = 1.0;
      double cur = z;
      phi(static_cast<Eigen::Index>(j), 0) = 1.0;
      for (int d = 1; d <= degree; ++d) {
        phi(static_cast<Eigen::Index>(j), d) = cur;
        const double next = z * cur - d * prev;
        prev = cur;
        cur = next;
      }
    }
    LevelBasis basis{phi, Eigen::ColPivHouseholderQR<Eigen::MatrixXd>(phi)};
    bases_.push_back(std::move(basis));
  }

  Eigen::MatrixXd project(int k, const Eigen::MatrixXd& values) const {
    const auto& basis = bases_[static_cast<std::size_t>(k)];
    return basis.phi * basis.qr.solve(values);
  }

  template <class T>
  static Eigen::MatrixXd pack(const std::vector<T>& values) {
    if constexpr (std::is_arithmetic_v<T>) {
      Eigen::MatrixXd out(static_cast<Eigen::Index>(values.size()), 1);
      for (std::size_t j = 0; j < values.size(); ++j) out(static_cast<Eigen::Index>(j), 0) = values[j];
      return out;
    } else {
      Eigen::MatrixXd out(static_cast<Eigen::Index>(values.size()), values.front().size());
      for (std::size_t j = 0; j < values.size(); ++j) out.row(static_cast<Eigen::Index>(j)) = values[j].transpose();
      return out;
    }
  }

  template <class T>
  static std::vector<T> unpack(const Eigen::MatrixXd& m, const T& /*shape*/) {
    std::vector<T> out;
    out.reserve(static_cast<std::size_t>(m.rows()));
    for (Eigen::Index j = 0; j < m.rows(); ++j) {
      if constexpr (std::is_arithmetic_v<T>) {
        out.push_back(m(j, 0));
      } else {
        out.push_back(m.row(j).transpose());
      }
    }
    return out;
  }

  TimeGrid grid_;
  MCEnsembleOptions options_;
  std::vector<std::vector<double>> increments_;
  std::vector<LevelBasis> bases_;
};

}  // namespace slq
