#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace mbsc::cli {

enum ExitCode : int {
    kOk = 0,
    kUsage = 2,      // bad flags or malformed input files
    kSchema = 3,     // well-formed input that violates the contract (unknown unit, no W1, ...)
    kNumerical = 4,
};

/// Runs the command line `args` (args[0] is the program name). Errors are reported on `err`
/// as a single line starting with `error[<kind>]:`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mbsc::cli
