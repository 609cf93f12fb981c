// qoc: optimize pulses, analyze gates and run benchmark sweeps.

#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "qoc/cli/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Quantum optimal control for two coupled transmons"};
  app.require_subcommand(1);

  std::string config;
  std::string matrix;
  std::string controls;

  auto* optimize = app.add_subcommand("optimize", "Run GRAPE or Krotov from a JSON config");
  optimize->add_option("config", config, "Config file")->required();

  auto* gate = app.add_subcommand("gate", "Print Weyl coordinates and entanglement measures");
  gate->add_option("matrix", matrix, "4x4 matrix file, entries a+bj")->required();

  auto* bench = app.add_subcommand("benchmark", "Time gradient evaluations over a sweep");
  bench->add_option("config", config, "Config file")->required();

  auto* prop = app.add_subcommand("propagate", "Evaluate J for a given controls CSV");
  prop->add_option("config", config, "Config file")->required();
  prop->add_option("--controls", controls, "Controls CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return qoc::cli::kExitInvalid;
  }

  using namespace qoc::cli;
  if (*optimize) return cmd_optimize(config, std::cout, std::cerr);
  if (*gate) return cmd_gate(matrix, std::cout, std::cerr);
  if (*bench) return cmd_benchmark(config, std::cout, std::cerr);
  return cmd_propagate(config, controls, std::cout, std::cerr);
}
