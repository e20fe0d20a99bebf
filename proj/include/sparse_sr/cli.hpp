#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace sparse_sr {

/// Exit statuses of the command-line front end.
enum ExitCode : int { kExitOk = 0, kExitFailure = 1, kExitUsage = 2 };

/// Runs one `sparse-sr` command. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace sparse_sr
