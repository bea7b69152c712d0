#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "nnls_gbdt/scenario.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Solutions of the nonlocal matrix NLS equation from the zero seed"};
  app.require_subcommand(1);

  std::string scenario;
  nnls::cli::RunOptions opts;
  CLI::App* run = app.add_subcommand("run", "Build a scenario, write u.csv, detS.csv and report.json");
  run->add_option("scenario", scenario, "Scenario JSON file")->required();
  run->add_option("--out", opts.out_dir, "Output directory (default: the scenario's output, else .)");
  run->add_option("--refine", opts.refine, "Refinement levels for convergence-order checks")
      ->check(CLI::Range(0, 6));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : nnls::cli::kSchema;
  }
  return nnls::cli::run_scenario(scenario, opts, std::cout, std::cerr);
}
