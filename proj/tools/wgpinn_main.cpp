// wgpinn: train and check PINN solvers for the 2-D waveguide-junction
// Helmholtz problem.
//
//   wgpinn run <config.json>
//   wgpinn matrix <config.json>
//   wgpinn verify [config.json]
//   wgpinn eval <checkpoint.txt> <NXxNZ> [-o field.csv]
//
// Exit codes: 0 success, 1 usage/config error, 2 numeric failure,
// 3 verification failure. WGPINN_OUTPUT_ROOT prefixes relative output_dir.

#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "wgpinn/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Physics-informed neural network solver for Helmholtz scattering in a waveguide junction"};
  app.require_subcommand(1);

  std::string config;
  auto* run = app.add_subcommand("run", "Train one configuration and write its outputs");
  run->add_option("config", config, "JSON configuration file")->required()->check(CLI::ExistingFile);

  auto* matrix = app.add_subcommand("matrix", "Sweep formulations × wave numbers into an error table");
  matrix->add_option("config", config, "JSON configuration file")->required()->check(CLI::ExistingFile);

  auto* verify = app.add_subcommand("verify", "Run the oracle checks (gradients, equivalence, DtN, taper)");
  verify->add_option("config", config, "Optional JSON configuration with a 'verify' section")
      ->check(CLI::ExistingFile);

  std::string checkpoint, grid, output;
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a cell-centred grid");
  eval->add_option("checkpoint", checkpoint, "Checkpoint written by 'run'")
      ->required()
      ->check(CLI::ExistingFile);
  eval->add_option("grid", grid, "Grid as NXxNZ, e.g. 240x20")->required();
  eval->add_option("-o,--output", output, "Write the field CSV here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? wgpinn::kExitOk : wgpinn::kExitUsage;
  }

  try {
    if (*run) return wgpinn::run_single(config, std::cerr);
    if (*matrix) return wgpinn::run_matrix(config, std::cerr);
    if (*verify) return wgpinn::run_verify(config, std::cout);
    if (*eval) {
      if (output.empty()) return wgpinn::run_eval(checkpoint, grid, std::cout, std::cerr);
      std::ofstream out(output);
      if (!out) {
        std::cerr << "error: cannot write " << output << '\n';
        return wgpinn::kExitUsage;
      }
      return wgpinn::run_eval(checkpoint, grid, out, std::cerr);
    }
  } catch (const wgpinn::NumericFailure& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return wgpinn::kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return wgpinn::kExitUsage;
  }
  return wgpinn::kExitUsage;
}
