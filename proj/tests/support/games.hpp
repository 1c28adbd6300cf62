#pragma once

#include <functional>

#include "slq/slq.hpp"

namespace slq::fixtures {

/// Player 2 is player 1 with the labels exchanged.
template <FilteredSpace Space>
GameSpec<Space> symmetric_game(GameSpec<Space> g) {
  g.B[1] = g.B[0];
  g.D[1] = g.D[0];
  g.players[1] = swap_players(g).players[1];
  return g;
}

inline MatrixField map_field(const MatrixField& f, const std::function<Matrix(const Matrix&)>& op) {
  MatrixField out(f.first_level(), f.last_level());
  for (int k = f.first_level(); k <= f.last_level(); ++k) {
    for (const auto& m : f.level(k)) out.level(k).push_back(op(m));
  }
  return out;
}

/// Player i only moves and only cares about state mode i.
template <FilteredSpace Space>
GameSpec<Space> decoupled_game(GameSpec<Space> g) {
  const auto diag = [](const Matrix& m) { return Matrix(m.diagonal().asDiagonal()); };
  g.A1 = map_field(g.A1, diag);
  g.C = map_field(g.C, diag);
  for (int i = 0; i < 2; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    const auto keep_row = [i](const Matrix& m) {
      Matrix out = Matrix::Zero(m.rows(), m.cols());
      out.row(i) = m.row(i);
      return out;
    };
    const auto keep_col = [i](const Matrix& m) {
      Matrix out = Matrix::Zero(m.rows(), m.cols());
      out.col(i) = m.col(i);
      return out;
    };
    const auto nil = [](const Matrix& m) { return Matrix(Matrix::Zero(m.rows(), m.cols())); };
    g.B[ui] = map_field(g.B[ui], keep_row);
    g.D[ui] = map_field(g.D[ui], keep_row);
    auto& w = g.players[ui];
    w.Q = map_field(w.Q, diag);
    w.G = map_field(w.G, diag);
    w.S[ui] = map_field(w.S[ui], keep_col);
    w.S[1 - ui] = map_field(w.S[1 - ui], nil);
    w.R[0][1] = map_field(w.R[0][1], nil);
    w.R[1][0] = map_field(w.R[1][0], nil);
  }
  return g;
}

}  // namespace slq::fixtures
