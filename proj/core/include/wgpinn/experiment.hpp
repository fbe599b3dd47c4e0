#pragma once

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "wgpinn/trainer.hpp"
#include "wgpinn/verify.hpp"

namespace wgpinn {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitNumeric = 2,
  kExitVerification = 3,
};

/// Environment variable that, when set, prefixes relative output directories.
inline constexpr const char* kOutputRootEnv = "WGPINN_OUTPUT_ROOT";

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Everything one invocation needs. Parsed from a JSON file whose sections
/// mirror the members below; anything left out keeps its default. See
/// configs/ for complete examples.
struct ExperimentConfig {
  TrainConfig train;
  std::string output_dir = "runs/default";
  std::vector<Formulation> formulations = {Formulation::kClassical, Formulation::kTaper};
  std::vector<double> ks = {8.0, 9.0, 10.0, 13.0, 15.0, 16.0};
  VerifyOptions verify;
};

ExperimentConfig parse_config(const std::string& text, const std::string& origin = "<config>");
ExperimentConfig load_config(const std::filesystem::path& path);

/// The fully resolved configuration as pretty-printed JSON.
std::string config_to_json(const ExperimentConfig& cfg);

std::filesystem::path resolve_output_dir(const std::string& dir);

// CSV writers. Numbers use the C locale and 17 significant digits.
//   field:  x,z,re,im
//   trace:  step,lr,loss_total,loss_residual,loss_bottom,loss_top,loss_minus,loss_plus,eps_real,eps_imag
//   errors: formulation,k,status,eps_real,eps_imag,eps_real_train,eps_imag_train,final_loss,wall_seconds
void write_field_csv(std::ostream& out, const Matrix& points, const std::vector<Complex>& field);
void write_trace_header(std::ostream& out);
void write_trace_row(std::ostream& out, const TraceRecord& rec);

struct RunSummary {
  TrainResult result;
  double wall_seconds = 0.0;
  std::filesystem::path dir;
};

/// Train one configuration and write into dir: config.json, trace.csv
/// (streamed during training), field.csv, checkpoint.txt and summary.json.
RunSummary run_to_directory(const ExperimentConfig& cfg, const std::filesystem::path& dir,
                            std::ostream& log);

struct ErrorRow {
  Formulation formulation = Formulation::kTaper;
  double k = 0.0;
  bool ok = false;
  std::string status;
  RelativeError error;
  RelativeError train_error;
  double final_loss = 0.0;
  double wall_seconds = 0.0;
};

struct ErrorTable {
  std::vector<ErrorRow> rows;
};

void write_error_table(std::ostream& out, const ErrorTable& table);

/// `wgpinn run <config>`
int run_single(const std::filesystem::path& cfg_path, std::ostream& log);

/// `wgpinn matrix <config>`: every (formulation, k) cell in sequence, one
/// subdirectory each, plus errors.csv. Duplicate cells are dropped with a
/// warning; a failing cell is recorded and the sweep continues.
int run_matrix(const std::filesystem::path& cfg_path, std::ostream& log, ErrorTable* table = nullptr);

/// `wgpinn verify [config]`
int run_verify(const std::filesystem::path& cfg_path, std::ostream& log);

/// `wgpinn eval <checkpoint> <grid>` where grid is "NXxNZ", e.g. 240x20.
int run_eval(const std::filesystem::path& checkpoint, const std::string& grid, std::ostream& out,
             std::ostream& log);

GridShape parse_grid(const std::string& text);

}  // namespace wgpinn
