#pragma once

#include <cstdint>
#include <string>

#include "pldm/solver.hpp"

namespace pldm {

/// Full description of a run as driven by the command line: which instance
/// to build, solver parameters, and what to emit.  Loadable from a flat
/// key=value file (dotted keys as sections, '#' comments, unknown keys are
/// errors) and overridable by command-line flags.
struct RunConfig {
  std::string instance = "toy";  // toy | hvac | random
  std::uint64_t seed = 0;
  std::string init = "midpoint";  // midpoint | random
  SolverConfig solver;

  bool certificates = false;
  int baseline_multistarts = 0;  // 0 disables the baseline comparison
  std::string out_dir;           // empty: no files written
  bool format_csv = true;
  bool format_json = true;

  int hvac_zones = 3;
  int hvac_horizon = 8;
  int random_agents = 3;
  int random_dim = 2;
  double random_density = 0.5;

  /// Throws ValidationError on out-of-range or inconsistent settings.
  void validate() const;
};

/// Parse a config file.  ParseError carries the 1-based line number for
/// malformed lines and unknown keys; value constraints surface as
/// ValidationError.
RunConfig load_config(const std::string& path);

/// Apply one key=value assignment (same keys as the file format).
void apply_config_entry(RunConfig& config, const std::string& key,
                        const std::string& value, int line = 0);

/// Canonical serialization: every key in sorted order, numbers at full
/// precision, suitable for reloading via load_config.
std::string serialize_config(const RunConfig& config);

}  // namespace pldm
