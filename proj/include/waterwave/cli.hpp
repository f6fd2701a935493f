#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace waterwave::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kNumerical = 3 };

/// Runs one command line (args[0] is the program name). Diagnostics go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Applies WATERWAVE_THREADS (0 or unset = library default).
void configure_threads();

}  // namespace waterwave::cli
