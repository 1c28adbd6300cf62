#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "slq/io.hpp"
#include "slq/slq.hpp"
#include "support/random_problem.hpp"

using namespace slq;
using slq::io::json;

namespace {

json base_doc() {
  return json::parse(R"({
    "schema_version": 1,
    "grid": {"t0": 0.0, "T": 1.0, "K": 2},
    "dims": {"N": 1, "m": 1},
    "operator": {"eigenvalues": [-1.0]},
    "initial": {"eta": [1.0]},
    "coefficients": {"B": 1.0, "D": 0.2},
    "weights": {"Q": 1.0, "G": 1.0}
  })");
}

std::shared_ptr<const TreeSpace> tree(int K) { return std::make_shared<const TreeSpace>(build_tree(K, 0.0, 1.0)); }

ErrorCode parse_error(const json& doc, std::string* message = nullptr) {
  try {
    const auto c = io::parse_config(doc);
    io::build_problem(c, tree(c.K));
  } catch (const Error& e) {
    if (message) *message = e.what();
    return e.code();
  }
  ADD_FAILURE() << "expected a configuration error";
  return ErrorCode::io;
}

std::string render(const io::CommandOutcome& o) {
  std::ostringstream os;
  os << io::to_json(o.report).dump(2);
  for (const auto& [name, t] : o.report.tables) io::write_csv(os, t);
  return os.str();
}

}  // namespace

TEST(Config, DefaultsGiveIdentityControlWeight) {
  const auto c = io::parse_config(base_doc());
  const auto p = io::build_problem(c, tree(c.K));
  EXPECT_EQ(p.weights.R(0, 0), Matrix::Identity(1, 1));
  EXPECT_EQ(p.weights.S(1, 0), Matrix::Zero(1, 1));
  EXPECT_EQ(p.coeffs.sigma(1, 1), Vector::Zero(1));
  EXPECT_EQ(c.solver.s_factor, 2.0);
  EXPECT_EQ(c.backend.type, "tree");
}

TEST(Config, ZeroStepsIsAnInvalidGrid) {
  json doc = base_doc();
  doc["grid"]["K"] = 0;
  EXPECT_EQ(parse_error(doc), ErrorCode::invalid_grid);
  doc["grid"]["K"] = 2;
  doc["grid"]["T"] = 0.0;
  EXPECT_EQ(parse_error(doc), ErrorCode::invalid_grid);
}

TEST(Config, NodeTableCountErrorNamesTheField) {
  json doc = base_doc();
  doc["weights"]["R"] = json::parse(R"({"node_table": {"": 1.0, "u": 2.0}})");
  std::string msg;
  EXPECT_EQ(parse_error(doc, &msg), ErrorCode::shape);
  EXPECT_NE(msg.find("weights.R.node_table"), std::string::npos) << msg;
  EXPECT_NE(msg.find("expected 3 nodes"), std::string::npos) << msg;
}

TEST(Config, NodeTableFillsTheTree) {
  json doc = base_doc();
  doc["weights"]["R"] = json::parse(R"({"node_table": {"": 1.0, "u": 2.0, "d": 0.5}})");
  const auto c = io::parse_config(doc);
  const auto p = io::build_problem(c, tree(c.K));
  EXPECT_EQ(p.weights.R(1, 0)(0, 0), 2.0);
  EXPECT_EQ(p.weights.R(1, 1)(0, 0), 0.5);
}

TEST(Config, NodeTableRejectedOnEnsembles) {
  json doc = base_doc();
  doc["backend"] = {{"type", "mc"}, {"paths", 10}};
  doc["weights"]["R"] = json::parse(R"({"node_table": {"": 1.0, "u": 2.0, "d": 0.5}})");
  const auto c = io::parse_config(doc);
  auto space = std::make_shared<const MonteCarloSpace>(make_grid(c.K, c.t0, c.T), c.backend.mc);
  EXPECT_THROW(io::build_problem(c, space), Error);
}

TEST(Config, UnknownFieldRejectedWhenStrict) {
  json doc = base_doc();
  doc["weights"]["Z"] = 1.0;
  std::string msg;
  EXPECT_EQ(parse_error(doc, &msg), ErrorCode::config);
  EXPECT_NE(msg.find("weights.Z"), std::string::npos) << msg;
  doc["strict"] = false;
  const auto c = io::parse_config(doc);
  EXPECT_NO_THROW(io::build_problem(c, tree(c.K)));
}

TEST(Config, ShapeMismatchNamesTheField) {
  json doc = base_doc();
  doc["coefficients"]["B"] = json::parse("[[1.0, 2.0]]");
  std::string msg;
  EXPECT_EQ(parse_error(doc, &msg), ErrorCode::shape);
  EXPECT_NE(msg.find("coefficients.B"), std::string::npos) << msg;
}

TEST(Config, HashTracksContentAndSeed) {
  const auto a = io::parse_config(base_doc());
  json doc = base_doc();
  doc["weights"]["Q"] = 2.0;
  const auto b = io::parse_config(doc);
  EXPECT_EQ(a.hash, io::parse_config(base_doc()).hash);
  EXPECT_NE(a.hash, b.hash);
  const auto r1 = io::run_command("validate", a, {});
  const auto r2 = io::run_command("validate", a, {std::uint64_t{9}});
  EXPECT_NE(r1.report.config_hash, r2.report.config_hash);
}

TEST(Report, EmptyReportGivesHeaderOnlyCsv) {
  io::ResultReport r;
  std::ostringstream os;
  io::write_summary_csv(os, r);
  EXPECT_EQ(os.str(), "key,value\n");
  io::Table t{{"a", "b"}, {}};
  std::ostringstream ts;
  io::write_csv(ts, t);
  EXPECT_EQ(ts.str(), "a,b\n");
}

TEST(Report, FilesWrittenPerTable) {
  const auto dir = std::filesystem::temp_directory_path() / "slq_report_test";
  std::filesystem::remove_all(dir);
  const auto out = io::run_command("solve", io::parse_config(base_doc()));
  ASSERT_EQ(out.exit_code, 0);
  const auto files = io::emit_report(out.report, "csv", dir.string());
  ASSERT_EQ(files.size(), 2u);
  EXPECT_TRUE(std::filesystem::exists(dir / "solve.csv"));
  std::ifstream f(dir / "solve_control.csv");
  std::string header;
  std::getline(f, header);
  EXPECT_EQ(header, "level,node,component,value");
  std::filesystem::remove_all(dir);
}

TEST(Commands, RerunsAreByteIdentical) {
  json doc = json::parse(R"({
    "schema_version": 1,
    "grid": {"K": 3},
    "dims": {"N": 2, "m": 1},
    "operator": {"preset": "heat"},
    "random": {"seed": 5},
    "checks": {"instances": 2}
  })");
  const auto c = io::parse_config(doc);
  for (const char* cmd : {"solve", "gradient-check", "duality-check", "oracle-compare"}) {
    const auto a = io::run_command(cmd, c);
    const auto b = io::run_command(cmd, c);
    EXPECT_EQ(a.exit_code, 0) << cmd;
    EXPECT_EQ(render(a), render(b)) << cmd;
  }
}

TEST(Commands, ExitCodes) {
  json doc = base_doc();
  doc["weights"]["R"] = -1.0;
  doc["coefficients"].erase("D");
  const auto c = io::parse_config(doc);
  const auto v = io::run_command("validate", c);
  EXPECT_EQ(v.exit_code, 0);
  EXPECT_FALSE(v.report.body["finiteness"]["nonneg"].get<bool>());
  EXPECT_EQ(io::run_command("solve", c).exit_code, 3);
  EXPECT_EQ(io::run_command("nash", c).exit_code, 2);
  EXPECT_EQ(io::run_command("frobnicate", c).exit_code, 2);
}

TEST(Commands, ScalarConvergenceIsExact) {
  json doc = json::parse(R"({
    "schema_version": 1,
    "grid": {"K": 4},
    "dims": {"N": 1, "m": 1},
    "operator": {"eigenvalues": [0.0]},
    "initial": {"eta": [1.0]},
    "coefficients": {"B": 1.0},
    "weights": {"Q": 0.0, "G": 1.0},
    "checks": {"convergence_K": [4, 8, 16, 32, 64], "reference_cost": 0.25}
  })");
  const auto out = io::run_command("convergence", io::parse_config(doc));
  EXPECT_EQ(out.exit_code, 0);
  EXPECT_LE(out.report.body["final_error"].get<double>(), 1e-14);
}

TEST(Oracle, AgreesWithOperatorSolve) {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    fixtures::Sampler rng(seed);
    fixtures::RandomOptions o;
    o.steps = 3;
    o.control_dim = 2;
    const auto p = fixtures::random_problem(tree(3), rng, o);
    const auto dense = io::brute_force_minimizer(p);
    const auto sol = solve_open_loop(p);
    EXPECT_LE(process_norm(*p.space, combine(*p.space, 1.0, sol.u, -1.0, dense.u)), 1e-8);
    EXPECT_NEAR(dense.cost, sol.diagnostics.cost, 1e-10 * std::max(1.0, std::abs(dense.cost)));
    EXPECT_LE(dense.hessian_asymmetry, 1e-10);
    EXPECT_GT(dense.min_hessian_eig, 0.0);
  }
}

TEST(Oracle, ZeroLinearTermGivesZeroMinimizer) {
  fixtures::Sampler rng(3);
  const auto p = homogeneous(fixtures::random_problem(tree(3), rng));
  auto q = p;
  q.eta.setZero();
  const auto dense = io::brute_force_minimizer(q);
  double worst = 0.0;
  for (int k = dense.u.first_level(); k <= dense.u.last_level(); ++k) {
    for (const auto& v : dense.u.level(k)) worst = std::max(worst, v.cwiseAbs().maxCoeff());
  }
  EXPECT_LE(worst, 1e-12);
  EXPECT_NEAR(dense.cost, 0.0, 1e-14);
}

TEST(Oracle, RefusesLargeOrIndefiniteProblems) {
  fixtures::Sampler rng(1);
  fixtures::RandomOptions o;
  o.steps = 8;
  EXPECT_THROW(io::brute_force_minimizer(fixtures::random_problem(tree(8), rng, o)), Error);
  auto p = fixtures::scalar_benchmark(tree(2));
  p.weights.R = constant_field<Matrix>(0, 1, Matrix::Constant(1, 1, -1.0));
  try {
    io::brute_force_minimizer(p);
    FAIL() << "expected indefinite";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::indefinite);
  }
}
