#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace st1::cli {

enum ExitCode : int { ok = 0, usage_error = 1, data_error = 2, not_converged = 3 };

// Runs the command line `args` (without the program name).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace st1::cli
