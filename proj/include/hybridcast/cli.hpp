#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace hybridcast::cli {

// Process exit codes.
enum ExitCode : int {
    kOk = 0,
    kUsageError = 1,  // bad flags, bad or missing config, invalid parameters
    kDataError = 2,   // unreadable or malformed input data
    kNumericalError = 3,  // divergence, singular systems, failed gradient check
};

// Runs one command line (without the program name). Normal output goes to
// `out`, diagnostics to `err`; returns the exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace hybridcast::cli
