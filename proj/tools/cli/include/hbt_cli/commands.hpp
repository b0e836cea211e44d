#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "hbt_cli/config.hpp"

namespace hbt::cli {

struct run_options {
  std::string out;  // empty: command default
  int threads = 1;
  bool oracle = false;
  std::optional<double> truncation_tol;
};

const std::vector<std::string>& command_names();

// Runs one subcommand. Human-readable results go to `out`, warnings to `err`.
// Returns the process exit code; validation and numerical errors propagate as
// exceptions (see exit_code_for).
int run_command(const std::string& name, run_config config, const run_options& options,
                std::ostream& out, std::ostream& err);

// 2 for validation errors, 3 for numerical failures, 1 otherwise.
int exit_code_for(const std::exception& e);

}  // namespace hbt::cli
