#pragma once

#include "infspec/domain_io.hpp"
#include "infspec/error.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace infspec::cli {

struct BetaSweep {
  double from = 0.0;
  double to = 0.0;
  int count = 0;
  std::vector<double> values() const;  ///< count points, both ends included
};

struct RunConfig {
  std::string group;   ///< geom | infty | plap | domain
  std::string action;  ///< e.g. lambda2, study, make
  std::string domain_path;
  std::optional<double> beta;
  std::optional<BetaSweep> sweep;
  std::optional<double> p;
  std::vector<double> p_list;
  double h = 0.02;
  std::string out_path;
  std::string mesh_out;
  std::uint64_t seed = 0x5eed5eedULL;
  std::optional<double> tol;  ///< solver tolerance override (plap)
  int path_steps = 16;
  double path_resolution = 0.0;  ///< 0: D_e / 100
  // domain make
  std::string builtin;
  BuiltinParams builtin_params;
};

/// "a:b:n" with n >= 2 and 0 < a < b. Throws ConfigError.
BetaSweep parse_sweep(const std::string& text);
/// Comma-separated ascending list of p >= 2. Throws ConfigError.
std::vector<double> parse_p_list(const std::string& text);

/// Checks the cross-field rules and that input paths exist. Throws ConfigError.
void validate(const RunConfig& config);

/// Executes the command and writes the CSV; returns the one-line summary.
/// Errors propagate unchanged.
std::string run(const RunConfig& config, std::ostream& csv_fallback);

/// 0 ok, 2 configuration, 3 domain file, 4 solver.
int exit_code(ErrorKind kind);

/// Worker cap from INFSPEC_THREADS (default: hardware concurrency, at least 1).
unsigned worker_count();

/// Full entry point: parse argv, run, report. Writes a diagnostic file on failure.
int main(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace infspec::cli
