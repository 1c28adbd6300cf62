#pragma once

// JSON problem configuration. A field is given as
//   value                               constant (same as {"constant": value})
//   {"time_table": [v_0, ..., v_{L}]}   one value per level
//   {"node_table": {"": v, "u": v, "d": v, "uu": v, ...}}
// where node tables list every node of every level by its up/down path, first
// step first. Matrices are arrays of rows; a scalar in a square matrix slot
// means a multiple of the identity. Unset fields are zero, except R (and each
// player's own R_ii), which default to the identity.

#include <cstdint>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "slq/adapted.hpp"
#include "slq/error.hpp"
#include "slq/galerkin.hpp"
#include "slq/game.hpp"
#include "slq/monte_carlo.hpp"
#include "slq/random.hpp"
#include "slq/tree.hpp"

namespace slq::io {

using json = nlohmann::json;

inline constexpr int schema_version = 1;

struct BackendConfig {
  std::string type = "tree";  // "tree" or "mc"
  MCEnsembleOptions mc{};
};

struct SolverConfig {
  double tolerance = 1e-10;
  int max_iter_factor = 10;
  double s_factor = 2.0;
  int dense_threshold = 4096;
  bool allow_iterative = false;
  bool least_squares = false;
  bool symmetrize = false;
};

struct CheckConfig {
  int instances = 1;
  std::vector<double> epsilons{1e-3, 1e-2, 1e-1, 1.0};
  int deviations = 100;
  std::vector<int> convergence_K{4, 8, 16, 32};
  std::optional<double> reference_cost;
};

struct RandomConfig {
  bool enabled = false;
  std::uint64_t seed = 42;
  bool node_dependent = true;
  bool cross_term = true;
  double scale = 0.4;
};

struct ProblemConfig {
  std::string mode = "slq";  // "slq" or "game"
  double t0 = 0.0;
  double T = 1.0;
  int K = 1;
  BackendConfig backend;
  int N = 1;
  int m = 1;
  Vector eigenvalues;
  std::string operator_preset;
  int initial_level = 0;
  Vector eta;
  json coefficients = json::object();
  json weights = json::object();
  json game = json::object();
  SolverConfig solver;
  CheckConfig checks;
  RandomConfig random;
  bool strict = true;
  std::string hash;  // FNV-1a of the canonical document
};

namespace detail {

inline std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << h;
  return os.str();
}

[[noreturn]] inline void fail(ErrorCode code, const std::string& path, const std::string& what) {
  throw Error(code, path + ": " + what);
}

inline void check_keys(const json& obj, const std::string& path, std::initializer_list<const char*> allowed, bool strict) {
  if (!obj.is_object()) fail(ErrorCode::config, path, "expected an object");
  if (!strict) return;
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : obj.items()) {
    if (!ok.count(key)) fail(ErrorCode::config, path.empty() ? key : path + "." + key, "unknown field");
  }
}

template <class T>
T get_number(const json& obj, const char* key, const std::string& path, T fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  const std::string where = path.empty() ? key : path + "." + key;
  if constexpr (std::is_same_v<T, bool>) {
    if (!v.is_boolean()) fail(ErrorCode::config, where, "expected a boolean");
    return v.get<bool>();
  } else if constexpr (std::is_integral_v<T>) {
    if (!v.is_number_integer()) fail(ErrorCode::config, where, "expected an integer");
    return v.get<T>();
  } else {
    if (!v.is_number()) fail(ErrorCode::config, where, "expected a number");
    return v.get<T>();
  }
}

inline Vector parse_vector(const json& v, Eigen::Index n, const std::string& path) {
  if (v.is_number()) {
    if (n != 1) fail(ErrorCode::shape, path, "expected a vector of length " + std::to_string(n));
    return Vector::Constant(1, v.get<double>());
  }
  if (!v.is_array() || static_cast<Eigen::Index>(v.size()) != n) {
    fail(ErrorCode::shape, path, "expected a vector of length " + std::to_string(n));
  }
  Vector out(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const json& e = v[static_cast<std::size_t>(i)];
    if (!e.is_number()) fail(ErrorCode::config, path + "[" + std::to_string(i) + "]", "expected a number");
    out(i) = e.get<double>();
  }
  return out;
}

inline Matrix parse_matrix(const json& v, Eigen::Index rows, Eigen::Index cols, const std::string& path) {
  const std::string shape = std::to_string(rows) + "x" + std::to_string(cols);
  if (v.is_number()) {
    if (rows != cols) fail(ErrorCode::shape, path, "scalar given for a non-square " + shape + " matrix");
    return v.get<double>() * Matrix::Identity(rows, cols);
  }
  if (!v.is_array() || static_cast<Eigen::Index>(v.size()) != rows) {
    fail(ErrorCode::shape, path, "expected a " + shape + " matrix");
  }
  Matrix out(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    out.row(i) = parse_vector(v[static_cast<std::size_t>(i)], cols, path + "[" + std::to_string(i) + "]").transpose();
  }
  return out;
}

/// Level-k node index of a path; the first step is the most significant bit.
inline std::optional<std::size_t> path_index(const std::string& path) {
  std::size_t node = 0;
  for (char c : path) {
    if (c != 'u' && c != 'd') return std::nullopt;
    node = (node << 1) | (c == 'd' ? 1U : 0U);
  }
  return node;
}

/// Parses one field onto levels first..last; `make(value, path)` parses one value.
template <class T, class Make>
Adapted<T> parse_field(const json& field, int first, int last, bool exact_backend, const std::string& path, Make&& make) {
  Adapted<T> out(first, last);
  const bool table = field.is_object();
  if (!table) {
    const T value = make(field, path);
    for (int k = first; k <= last; ++k) out.level(k).push_back(value);
    return out;
  }
  if (field.size() != 1) fail(ErrorCode::config, path, "expected exactly one of constant, time_table, node_table");
  const auto& [kind, body] = *field.items().begin();
  const std::string where = path + "." + kind;
  if (kind == "constant") {
    const T value = make(body, where);
    for (int k = first; k <= last; ++k) out.level(k).push_back(value);
  } else if (kind == "time_table") {
    const auto levels = static_cast<std::size_t>(last - first + 1);
    if (!body.is_array() || body.size() != levels) {
      fail(ErrorCode::shape, where, "expected " + std::to_string(levels) + " per-level entries");
    }
    for (int k = first; k <= last; ++k) {
      const auto i = static_cast<std::size_t>(k - first);
      out.level(k).push_back(make(body[i], where + "[" + std::to_string(i) + "]"));
    }
  } else if (kind == "node_table") {
    if (!exact_backend) fail(ErrorCode::config, where, "node tables require the tree backend");
    if (!body.is_object()) fail(ErrorCode::config, where, "expected an object keyed by node paths");
    std::size_t expected = 0;
    for (int k = first; k <= last; ++k) {
      const std::size_t atoms = std::size_t{1} << k;
      expected += atoms;
      out.level(k).resize(atoms);
    }
    std::vector<std::vector<bool>> seen;
    for (int k = first; k <= last; ++k) seen.emplace_back(std::size_t{1} << k, false);
    for (const auto& [key, value] : body.items()) {
      const auto node = path_index(key);
      const int level = static_cast<int>(key.size());
      if (!node || level < first || level > last) {
        fail(ErrorCode::shape, where + "[\"" + key + "\"]",
             "node path must use u/d and have length " + std::to_string(first) + ".." + std::to_string(last));
      }
      out.level(level)[*node] = make(value, where + "[\"" + key + "\"]");
      seen[static_cast<std::size_t>(level - first)][*node] = true;
    }
    if (body.size() != expected) {
      fail(ErrorCode::shape, where,
           "expected " + std::to_string(expected) + " nodes, got " + std::to_string(body.size()));
    }
  } else {
    fail(ErrorCode::config, where, "unknown field form (use constant, time_table or node_table)");
  }
  return out;
}

}  // namespace detail

/// Checks the document and applies defaults. Field tables are parsed once
/// here for validation and again when a problem is built.
inline ProblemConfig parse_config(const json& doc) {
  ProblemConfig c;
  if (!doc.is_object()) detail::fail(ErrorCode::config, "<root>", "expected an object");
  c.strict = detail::get_number<bool>(doc, "strict", "", true);
  detail::check_keys(doc, "",
                     {"schema_version", "strict", "mode", "grid", "backend", "dims", "operator", "initial",
                      "coefficients", "weights", "game", "solver", "checks", "random", "description"},
                     c.strict);
  if (!doc.contains("schema_version")) detail::fail(ErrorCode::config, "schema_version", "missing");
  if (detail::get_number<int>(doc, "schema_version", "", 0) != schema_version) {
    detail::fail(ErrorCode::config, "schema_version", "unsupported version (expected " + std::to_string(schema_version) + ")");
  }
  if (doc.contains("mode")) {
    if (!doc["mode"].is_string()) detail::fail(ErrorCode::config, "mode", "expected a string");
    c.mode = doc["mode"].get<std::string>();
  }
  if (c.mode != "slq" && c.mode != "game") detail::fail(ErrorCode::config, "mode", "must be \"slq\" or \"game\"");

  if (!doc.contains("grid")) detail::fail(ErrorCode::config, "grid", "missing");
  const json& grid = doc["grid"];
  detail::check_keys(grid, "grid", {"t0", "T", "K"}, c.strict);
  c.t0 = detail::get_number<double>(grid, "t0", "grid", 0.0);
  c.T = detail::get_number<double>(grid, "T", "grid", 1.0);
  c.K = detail::get_number<int>(grid, "K", "grid", 0);
  make_grid(c.K, c.t0, c.T);

  if (doc.contains("backend")) {
    const json& b = doc["backend"];
    detail::check_keys(b, "backend", {"type", "paths", "seed", "basis_degree"}, c.strict);
    if (b.contains("type")) {
      if (!b["type"].is_string()) detail::fail(ErrorCode::config, "backend.type", "expected a string");
      c.backend.type = b["type"].get<std::string>();
    }
    if (c.backend.type != "tree" && c.backend.type != "mc") {
      detail::fail(ErrorCode::config, "backend.type", "must be \"tree\" or \"mc\"");
    }
    const int paths = detail::get_number<int>(b, "paths", "backend", 1000);
    if (paths < 2) detail::fail(ErrorCode::config, "backend.paths", "must be >= 2");
    c.backend.mc.paths = static_cast<std::size_t>(paths);
    c.backend.mc.seed = detail::get_number<std::uint64_t>(b, "seed", "backend", 1);
    c.backend.mc.basis_degree = detail::get_number<int>(b, "basis_degree", "backend", 2);
    if (c.backend.mc.basis_degree < 0) detail::fail(ErrorCode::config, "backend.basis_degree", "must be >= 0");
  }
  if (c.backend.type == "tree" && c.K > TreeSpace::max_steps) {
    detail::fail(ErrorCode::capacity, "grid.K", "tree backend supports K <= " + std::to_string(TreeSpace::max_steps));
  }

  if (!doc.contains("dims")) detail::fail(ErrorCode::config, "dims", "missing");
  detail::check_keys(doc["dims"], "dims", {"N", "m"}, c.strict);
  c.N = detail::get_number<int>(doc["dims"], "N", "dims", 0);
  c.m = detail::get_number<int>(doc["dims"], "m", "dims", 0);
  if (c.N < 1) detail::fail(ErrorCode::shape, "dims.N", "must be >= 1");
  if (c.m < 1) detail::fail(ErrorCode::shape, "dims.m", "must be >= 1");

  if (doc.contains("operator")) {
    const json& op = doc["operator"];
    detail::check_keys(op, "operator", {"eigenvalues", "preset"}, c.strict);
    if (op.contains("eigenvalues") == op.contains("preset")) {
      detail::fail(ErrorCode::config, "operator", "give exactly one of eigenvalues, preset");
    }
    if (op.contains("preset")) {
      if (!op["preset"].is_string() || op["preset"].get<std::string>() != "heat") {
        detail::fail(ErrorCode::config, "operator.preset", "unknown preset (available: \"heat\")");
      }
      c.operator_preset = "heat";
      c.eigenvalues = dirichlet_laplacian(c.N).eigenvalues;
    } else {
      c.eigenvalues = detail::parse_vector(op["eigenvalues"], c.N, "operator.eigenvalues");
    }
  } else {
    c.eigenvalues = Vector::Zero(c.N);
  }

  c.eta = Vector::Zero(c.N);
  if (doc.contains("initial")) {
    const json& init = doc["initial"];
    detail::check_keys(init, "initial", {"level", "eta"}, c.strict);
    c.initial_level = detail::get_number<int>(init, "level", "initial", 0);
    if (init.contains("eta")) c.eta = detail::parse_vector(init["eta"], c.N, "initial.eta");
  }
  if (c.initial_level < 0 || c.initial_level >= c.K) {
    detail::fail(ErrorCode::shape, "initial.level", "must lie in 0..K-1");
  }

  if (doc.contains("solver")) {
    const json& s = doc["solver"];
    detail::check_keys(s, "solver",
                       {"tolerance", "max_iter_factor", "s_factor", "dense_threshold", "allow_iterative",
                        "least_squares", "symmetrize"},
                       c.strict);
    c.solver.tolerance = detail::get_number<double>(s, "tolerance", "solver", c.solver.tolerance);
    c.solver.max_iter_factor = detail::get_number<int>(s, "max_iter_factor", "solver", c.solver.max_iter_factor);
    c.solver.s_factor = detail::get_number<double>(s, "s_factor", "solver", c.solver.s_factor);
    c.solver.dense_threshold = detail::get_number<int>(s, "dense_threshold", "solver", c.solver.dense_threshold);
    c.solver.allow_iterative = detail::get_number<bool>(s, "allow_iterative", "solver", false);
    c.solver.least_squares = detail::get_number<bool>(s, "least_squares", "solver", false);
    c.solver.symmetrize = detail::get_number<bool>(s, "symmetrize", "solver", false);
    if (c.solver.s_factor != 1.0 && c.solver.s_factor != 2.0) {
      detail::fail(ErrorCode::config, "solver.s_factor", "must be 1 or 2");
    }
    if (!(c.solver.tolerance > 0.0)) detail::fail(ErrorCode::config, "solver.tolerance", "must be positive");
  }

  if (doc.contains("checks")) {
    const json& s = doc["checks"];
    detail::check_keys(s, "checks", {"instances", "epsilons", "deviations", "convergence_K", "reference_cost"}, c.strict);
    c.checks.instances = detail::get_number<int>(s, "instances", "checks", 1);
    c.checks.deviations = detail::get_number<int>(s, "deviations", "checks", 100);
    if (c.checks.instances < 1) detail::fail(ErrorCode::config, "checks.instances", "must be >= 1");
    if (c.checks.deviations < 0) detail::fail(ErrorCode::config, "checks.deviations", "must be >= 0");
    if (s.contains("epsilons")) {
      const Vector e = detail::parse_vector(s["epsilons"], static_cast<Eigen::Index>(s["epsilons"].size()), "checks.epsilons");
      c.checks.epsilons.assign(e.data(), e.data() + e.size());
    }
    if (s.contains("convergence_K")) {
      c.checks.convergence_K.clear();
      if (!s["convergence_K"].is_array()) detail::fail(ErrorCode::config, "checks.convergence_K", "expected an array");
      for (std::size_t i = 0; i < s["convergence_K"].size(); ++i) {
        const json& v = s["convergence_K"][i];
        if (!v.is_number_integer() || v.get<int>() < 1) {
          detail::fail(ErrorCode::invalid_grid, "checks.convergence_K[" + std::to_string(i) + "]", "expected an integer >= 1");
        }
        c.checks.convergence_K.push_back(v.get<int>());
      }
    }
    if (s.contains("reference_cost")) c.checks.reference_cost = detail::get_number<double>(s, "reference_cost", "checks", 0.0);
  }

  if (doc.contains("random")) {
    const json& r = doc["random"];
    detail::check_keys(r, "random", {"seed", "node_dependent", "cross_term", "scale"}, c.strict);
    c.random.enabled = true;
    c.random.seed = detail::get_number<std::uint64_t>(r, "seed", "random", 42);
    c.random.node_dependent = detail::get_number<bool>(r, "node_dependent", "random", true);
    c.random.cross_term = detail::get_number<bool>(r, "cross_term", "random", true);
    c.random.scale = detail::get_number<double>(r, "scale", "random", 0.4);
    for (const char* key : {"coefficients", "weights", "game"}) {
      if (doc.contains(key)) detail::fail(ErrorCode::config, key, "cannot be combined with a random instance");
    }
  }

  if (doc.contains("coefficients")) c.coefficients = doc["coefficients"];
  if (doc.contains("weights")) c.weights = doc["weights"];
  if (doc.contains("game")) c.game = doc["game"];
  if (c.mode == "slq" && doc.contains("game")) detail::fail(ErrorCode::config, "game", "only allowed in game mode");
  if (c.mode == "game" && doc.contains("weights")) {
    detail::fail(ErrorCode::config, "weights", "game mode takes per-player weights under game.players");
  }
  c.hash = detail::fnv1a_hex(doc.dump());
  return c;
}

namespace detail {

struct FieldReader {
  const ProblemConfig& c;
  int K;
  bool exact;

  MatrixField matrix(const json& parent, const char* key, const std::string& path, int first, int last,
                     Eigen::Index rows, Eigen::Index cols, const Matrix& fallback) const {
    if (!parent.contains(key)) return constant_field<Matrix>(first, last, fallback);
    return parse_field<Matrix>(parent[key], first, last, exact, path + "." + key,
                               [&](const json& v, const std::string& where) { return parse_matrix(v, rows, cols, where); });
  }

  Process vector(const json& parent, const char* key, const std::string& path, int first, int last,
                 Eigen::Index n) const {
    if (!parent.contains(key)) return constant_field<Vector>(first, last, Vector::Zero(n));
    return parse_field<Vector>(parent[key], first, last, exact, path + "." + key,
                               [&](const json& v, const std::string& where) { return parse_vector(v, n, where); });
  }
};

inline void check_fields(const json& obj, const std::string& path, std::initializer_list<const char*> allowed, bool strict) {
  check_keys(obj, path, allowed, strict);
}

}  // namespace detail

/// Problem on `space` (whose step count may differ from the configured K when
/// every field is constant).
template <FilteredSpace Space>
LQProblem<Space> build_problem(const ProblemConfig& c, std::shared_ptr<const Space> space) {
  if (c.mode != "slq") throw Error(ErrorCode::config, "mode: this command needs an slq configuration");
  const int K = space->steps();
  LQProblem<Space> p;
  if (c.random.enabled) {
    Sampler rng(c.random.seed);
    RandomOptions o;
    o.steps = K;
    o.state_dim = c.N;
    o.control_dim = c.m;
    o.initial_level = c.initial_level;
    o.node_dependent = c.random.node_dependent;
    o.cross_term = c.random.cross_term;
    o.scale = c.random.scale;
    o.T = c.T;
    p = random_problem(space, rng, o);
    p.A = SpectralOperator{c.eigenvalues};
    p.s_factor = c.solver.s_factor;
    return p;
  }
  const detail::FieldReader r{c, K, Space::exact};
  const int N = c.N;
  const int m = c.m;
  const json& co = c.coefficients;
  const json& w = c.weights;
  detail::check_fields(co, "coefficients", {"A1", "B", "C", "D", "b", "sigma"}, c.strict);
  detail::check_fields(w, "weights", {"Q", "R", "S", "G", "q", "r", "g"}, c.strict);
  p.space = std::move(space);
  p.A = SpectralOperator{c.eigenvalues};
  p.control_dim = m;
  p.initial_level = c.initial_level;
  p.eta = c.eta;
  p.s_factor = c.solver.s_factor;
  p.coeffs.A1 = r.matrix(co, "A1", "coefficients", 0, K - 1, N, N, Matrix::Zero(N, N));
  p.coeffs.B = r.matrix(co, "B", "coefficients", 0, K - 1, N, m, Matrix::Zero(N, m));
  p.coeffs.C = r.matrix(co, "C", "coefficients", 0, K - 1, N, N, Matrix::Zero(N, N));
  p.coeffs.D = r.matrix(co, "D", "coefficients", 0, K - 1, N, m, Matrix::Zero(N, m));
  p.coeffs.b = r.vector(co, "b", "coefficients", 0, K - 1, N);
  p.coeffs.sigma = r.vector(co, "sigma", "coefficients", 0, K - 1, N);
  p.weights.Q = r.matrix(w, "Q", "weights", 0, K - 1, N, N, Matrix::Zero(N, N));
  p.weights.R = r.matrix(w, "R", "weights", 0, K - 1, m, m, Matrix::Identity(m, m));
  p.weights.S = r.matrix(w, "S", "weights", 0, K - 1, m, N, Matrix::Zero(m, N));
  p.weights.G = r.matrix(w, "G", "weights", K, K, N, N, Matrix::Zero(N, N));
  p.weights.q = r.vector(w, "q", "weights", 0, K - 1, N);
  p.weights.r = r.vector(w, "r", "weights", 0, K - 1, m);
  p.weights.g = r.vector(w, "g", "weights", K, K, N);
  if (c.solver.symmetrize) symmetrize_weights(p);
  require_consistent(p);
  return p;
}

template <FilteredSpace Space>
GameSpec<Space> build_game(const ProblemConfig& c, std::shared_ptr<const Space> space) {
  if (c.mode != "game") throw Error(ErrorCode::config, "mode: this command needs a game configuration");
  const int K = space->steps();
  GameSpec<Space> g;
  if (c.random.enabled) {
    Sampler rng(c.random.seed);
    RandomOptions o;
    o.steps = K;
    o.state_dim = c.N;
    o.control_dim = c.m;
    o.initial_level = c.initial_level;
    o.node_dependent = c.random.node_dependent;
    o.cross_term = c.random.cross_term;
    o.scale = c.random.scale;
    o.T = c.T;
    g = random_game(space, rng, o);
    g.A = SpectralOperator{c.eigenvalues};
    g.s_factor = c.solver.s_factor;
    return g;
  }
  const detail::FieldReader r{c, K, Space::exact};
  const int N = c.N;
  const int m = c.m;
  const json& co = c.coefficients;
  const json& gm = c.game;
  detail::check_fields(co, "coefficients", {"A1", "C", "b", "sigma"}, c.strict);
  detail::check_fields(gm, "game", {"B1", "B2", "D1", "D2", "players"}, c.strict);
  g.space = std::move(space);
  g.A = SpectralOperator{c.eigenvalues};
  g.control_dim = m;
  g.initial_level = c.initial_level;
  g.eta = c.eta;
  g.s_factor = c.solver.s_factor;
  g.A1 = r.matrix(co, "A1", "coefficients", 0, K - 1, N, N, Matrix::Zero(N, N));
  g.C = r.matrix(co, "C", "coefficients", 0, K - 1, N, N, Matrix::Zero(N, N));
  g.b = r.vector(co, "b", "coefficients", 0, K - 1, N);
  g.sigma = r.vector(co, "sigma", "coefficients", 0, K - 1, N);
  g.B = {r.matrix(gm, "B1", "game", 0, K - 1, N, m, Matrix::Zero(N, m)),
         r.matrix(gm, "B2", "game", 0, K - 1, N, m, Matrix::Zero(N, m))};
  g.D = {r.matrix(gm, "D1", "game", 0, K - 1, N, m, Matrix::Zero(N, m)),
         r.matrix(gm, "D2", "game", 0, K - 1, N, m, Matrix::Zero(N, m))};
  const json players = gm.contains("players") ? gm["players"] : json::array({json::object(), json::object()});
  if (!players.is_array() || players.size() != 2) {
    throw Error(ErrorCode::config, "game.players: expected an array of two players");
  }
  for (std::size_t i = 0; i < 2; ++i) {
    const json& pw = players[i];
    const std::string path = "game.players[" + std::to_string(i) + "]";
    detail::check_fields(pw, path, {"Q", "S1", "S2", "R11", "R12", "R21", "R22", "G", "q", "r1", "r2", "g"}, c.strict);
    PlayerWeights& w = g.players[i];
    w.Q = r.matrix(pw, "Q", path, 0, K - 1, N, N, Matrix::Zero(N, N));
    w.G = r.matrix(pw, "G", path, K, K, N, N, Matrix::Zero(N, N));
    w.q = r.vector(pw, "q", path, 0, K - 1, N);
    w.g = r.vector(pw, "g", path, K, K, N);
    w.S = {r.matrix(pw, "S1", path, 0, K - 1, m, N, Matrix::Zero(m, N)),
           r.matrix(pw, "S2", path, 0, K - 1, m, N, Matrix::Zero(m, N))};
    w.r = {r.vector(pw, "r1", path, 0, K - 1, m), r.vector(pw, "r2", path, 0, K - 1, m)};
    static constexpr const char* names[2][2] = {{"R11", "R12"}, {"R21", "R22"}};
    for (std::size_t a = 0; a < 2; ++a) {
      for (std::size_t b = 0; b < 2; ++b) {
        const Matrix fallback = (a == i && b == i) ? Matrix(Matrix::Identity(m, m)) : Matrix(Matrix::Zero(m, m));
        w.R[a][b] = r.matrix(pw, names[a][b], path, 0, K - 1, m, m, fallback);
      }
    }
  }
  if (c.solver.symmetrize) {
    for (auto& w : g.players) {
      auto sym = [](MatrixField& f) {
        for (int k = f.first_level(); k <= f.last_level(); ++k) {
          for (auto& mtx : f.level(k)) mtx = (0.5 * (mtx + mtx.transpose())).eval();
        }
      };
      sym(w.Q);
      sym(w.G);
      for (auto& row : w.R) {
        for (auto& f : row) sym(f);
      }
    }
  }
  require_consistent(g);
  return g;
}

/// True when every field is a plain constant, so the problem can be rebuilt on
/// any grid.
inline bool grid_independent(const ProblemConfig& c) {
  // Random instances draw fresh values per level.
  if (c.random.enabled) return false;
  std::function<bool(const json&)> constant_only = [&](const json& obj) {
    for (const auto& [key, value] : obj.items()) {
      if (key == "players") {
        for (const auto& p : value) {
          if (!constant_only(p)) return false;
        }
        continue;
      }
      if (value.is_object() && !value.contains("constant")) return false;
    }
    return true;
  };
  return constant_only(c.coefficients) && constant_only(c.weights) && constant_only(c.game);
}

/// Reads and validates a configuration file; every field table is checked
/// against the configured grid.
inline ProblemConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot open config file " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::config, path + ": parse error: " + e.what());
  }
  ProblemConfig c = parse_config(doc);
  // Parse every table once against the configured grid so errors surface at load time.
  if (c.backend.type == "tree") {
    auto space = std::make_shared<const TreeSpace>(build_tree(c.K, c.t0, c.T));
    if (c.mode == "slq") {
      build_problem(c, space);
    } else {
      build_game(c, space);
    }
  } else {
    auto space = std::make_shared<const MonteCarloSpace>(make_grid(c.K, c.t0, c.T), c.backend.mc);
    if (c.mode == "slq") {
      build_problem(c, space);
    } else {
      build_game(c, space);
    }
  }
  return c;
}

}  // namespace slq::io
