#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "contextstrip/cli/run_config.hpp"

namespace cstrip {

struct DispatchOptions {
  /// Allow writing into a non-empty output directory.
  bool force = false;
};

/// phantom, train, predict, evaluate, crossval, transfer, gradcheck, selftest.
const std::vector<std::string>& command_names();

/// One-line summary per command, for help text.
std::string command_help(const std::string& command);

/// Runs one command. Results go to files under cfg.output (gradcheck and
/// selftest also print their table to `out`); progress lines go to `log`.
/// Throws ConfigError for a missing required key or an occupied output
/// directory and propagates module errors.
void run_command(const std::string& command, const RunConfig& cfg, const DispatchOptions& options,
                 std::ostream& out, std::ostream& log);

/// run_command with every error turned into a one-line message on `log`.
/// Returns 0 on success, 2 for configuration errors, 1 otherwise (including
/// a failed gradcheck or selftest).
int dispatch(const std::string& command, const RunConfig& cfg, const DispatchOptions& options,
             std::ostream& out, std::ostream& log);

}  // namespace cstrip
