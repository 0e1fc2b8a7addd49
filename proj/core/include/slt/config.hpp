#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace slt {

// Experiment settings. Defaults:
//   d=3 q=2 n=4096 xi=1 L=3 samples=1000 seed=1 threads=1 step_budget=0
//   horizon=0 (estimate-gamma: 10^6; scans: 4 max(n_grid)) ladder=dyadic
//   top_fraction=0.01 ratio=3 n_grid=4096 k_grid=1,2,3,4,5,6,7,8
//   d_grid=3..10 radius=0 (confined: uses radii) radii=8,12,16
//   output_dir=$SLT_OUTPUT_DIR or "." prefix=<subcommand>
struct ExperimentConfig {
  std::string subcommand;

  int d = 3;
  double q = 2.0;
  std::uint64_t n = 4096;
  std::vector<std::uint64_t> n_grid{4096};
  double xi = 1.0;
  std::vector<double> xi_grid;  // overrides xi when non-empty
  int L = 3;
  std::optional<double> M;
  std::int64_t radius = 0;
  std::vector<std::int64_t> radii{8, 12, 16};
  double ratio = 3.0;  // n / r^2 for confinement scaling
  std::vector<std::uint64_t> k_grid{1, 2, 3, 4, 5, 6, 7, 8};
  std::vector<int> d_grid{3, 4, 5, 6, 7, 8, 9, 10};
  std::uint64_t samples = 1000;
  std::uint64_t horizon = 0;
  std::uint64_t seed = 1;
  std::string ladder = "dyadic";  // dyadic | uniform | mixed
  double top_fraction = 0.01;

  // Execution only; not part of the hash.
  unsigned threads = 1;
  std::uint64_t step_budget = 0;
  std::filesystem::path output_dir;
  std::string prefix;

  // key=value lines, sorted by key, covering every parameter above except
  // the execution-only ones.
  std::string canonical() const;
  // FNV-1a 64 of canonical(), 16 lowercase hex digits.
  std::string hash() const;
};

const std::vector<std::string>& subcommands();
const std::vector<std::string>& config_keys();

// Ordered (key, value) pairs with their origin, e.g. "run.cfg:4" or "flag --n".
struct ConfigEntry {
  std::string key;
  std::string value;
  std::string origin;
};

// Flat "key = value" lines; '#' starts a comment; blank lines are skipped.
std::vector<ConfigEntry> parse_config_text(const std::string& text, const std::string& source);

// Applies the file entries (if any), then the flag entries, then validates.
// Throws ConfigError naming the offending line or flag, or the violated
// precondition.
ExperimentConfig load_config(const std::string& subcommand,
                             const std::optional<std::filesystem::path>& path,
                             const std::vector<ConfigEntry>& flags);

// Checks the preconditions of the selected subcommand.
void validate(const ExperimentConfig& config);

std::filesystem::path default_output_dir();

}  // namespace slt
