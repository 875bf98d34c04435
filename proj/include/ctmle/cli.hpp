#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ctmle {

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitData = 2, kExitNumerical = 3 };

/// Runs the command line; `args` excludes the program name. Output goes to
/// `out`, messages to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, char** argv);

}  // namespace ctmle
