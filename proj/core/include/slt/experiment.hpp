#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "slt/config.hpp"

namespace slt {

enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 2,        // unparsable or invalid configuration
  kExitVerification = 3,  // a pathwise invariant failed
  kExitResource = 4,      // step budget exhausted; partial results written
};

struct ExperimentResult {
  int exit_code = kExitOk;
  bool partial = false;
  std::uint64_t violations = 0;
  std::vector<std::filesystem::path> artifacts;
  std::string summary;  // short human-readable report
};

// Runs the configured subcommand and writes <prefix>.csv, <prefix>.json and
// <prefix>.plot.dat (plus tail curves where relevant) to config.output_dir.
// Precondition failures surface as ConfigError / PreconditionError.
ExperimentResult run_experiment(const ExperimentConfig& config);

}  // namespace slt
