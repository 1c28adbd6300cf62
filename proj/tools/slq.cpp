// slq <command> --config FILE [--seed N] [--format json|csv] [--out DIR]

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "slq/io.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Stochastic LQ control and two-player games on Galerkin-discretized state spaces"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string format = "json";
  std::string out_dir;

  for (const std::string& name : slq::io::command_names()) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "problem configuration (JSON)")->required();
    sub->add_option("--seed", seed, "override random and ensemble seeds");
    sub->add_option("--format", format, "report format")->check(CLI::IsMember({"json", "csv"}));
    sub->add_option("--out", out_dir, "write report files to this directory");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  slq::io::CommandOutcome outcome;
  try {
    const slq::io::ProblemConfig config = slq::io::load_config(config_path);
    outcome = slq::io::run_command(command, config, slq::io::RunOptions{seed});
  } catch (const slq::Error& e) {
    std::cerr << "slq: " << e.what() << "\n";
    return slq::io::detail::exit_code_for(e.code());
  }

  try {
    if (out_dir.empty()) {
      if (format == "json") {
        std::cout << slq::io::to_json(outcome.report).dump(2) << "\n";
      } else {
        slq::io::write_summary_csv(std::cout, outcome.report);
      }
    } else {
      for (const std::string& file : slq::io::emit_report(outcome.report, format, out_dir)) std::cerr << file << "\n";
    }
  } catch (const slq::Error& e) {
    std::cerr << "slq: " << e.what() << "\n";
    return 2;
  }
  if (outcome.report.body.contains("error")) {
    std::cerr << "slq: " << outcome.report.body["error"]["message"].get<std::string>() << "\n";
  }
  return outcome.exit_code;
}
