#pragma once

// Subcommand drivers. Every command writes its files into one output
// directory; each file starts with the resolved configuration.

#include <iosfwd>
#include <string>
#include <vector>

#include "kepreg/config.hpp"

namespace kepreg {

enum ExitCode : int { kExitSuccess = 0, kExitFailure = 1, kExitPartial = 2, kExitConfig = 3 };

const std::vector<std::string>& command_names();

/// Runs one subcommand; library errors are reported on `log` and mapped to
/// exit codes (ConfigError -> 3, other errors -> 1, partial results -> 2).
int run_command(const std::string& name, const RunConfig& config, std::ostream& log);

/// Loads the config (or defaults when path is empty), applies --out and
/// --jobs overrides, then runs the command.
int run_cli(const std::string& name, const std::string& config_path, const std::string& out_dir, int jobs,
            std::ostream& log);

}  // namespace kepreg
