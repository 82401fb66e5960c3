#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "granular/config.hpp"
#include "granular/inference.hpp"
#include "granular/ppc.hpp"

namespace granular::cli {

namespace fs = std::filesystem;

enum ExitCode : int { kOk = 0, kValidationFailure = 2, kNumericalFailure = 3 };

struct CountArgs {
  std::vector<fs::path> inputs;
  /// Required with several inputs: one row per input file for this referent.
  std::optional<std::string> referent;
  fs::path out;
  bool bruteforce = false;
};
void cmd_count(const CountArgs& args, std::ostream& log);

struct FitArgs {
  fs::path input;
  fs::path out;
};
void cmd_fit(const FitArgs& args, const RunConfig& cfg, std::ostream& log);

struct SimulateArgs {
  fs::path out;             // data CSV; the generating parameters go to <out>.json
  fs::path covariates_out;  // covariates CSV
};
void cmd_simulate(const SimulateArgs& args, const RunConfig& cfg, std::ostream& log);

struct InferArgs {
  fs::path stats;
  fs::path covariates;
  fs::path out_dir;
};
/// Writes draws_<model>.csv, summary_<model>.csv and diagnostics_<model>.json.
PosteriorDraws cmd_infer(const InferArgs& args, const RunConfig& cfg, std::ostream& log);

struct PpcArgs {
  std::vector<fs::path> draws;  // one file per model; the model is read from the columns
  fs::path stats;
  fs::path covariates;
  fs::path out_dir;
};
/// Writes ppc_<model>.csv per model and ppc_summary.json.
std::vector<PpcSummary> cmd_ppc(const PpcArgs& args, const RunConfig& cfg, std::ostream& log);

void cmd_kernel_audit(const fs::path& kernel_json, const RunConfig& cfg, std::ostream& out);

/// Recognizes the model from a draws header.
ModelKind model_from_names(const std::vector<std::string>& names);

/// Full command-line entry point; returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace granular::cli
