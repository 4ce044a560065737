#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace modfield::app {

/// Process exit codes.
enum ExitCode : int {
  kExitOk = 0,
  kExitIo = 2,         ///< unreadable/unwritable file, malformed file
  kExitConfig = 3,     ///< invalid configuration or dimension mismatch
  kExitNumerical = 4,  ///< non-finite loss or evaluation
};

/// Runs the command line `args` (without the program name). Normal output
/// goes to `out`, diagnostics to `err`; returns the exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// CSV cell for a double: shortest round-trip text, "inf"/"-inf"/"nan" for
/// non-finite values.
std::string csv_number(double v);

}  // namespace modfield::app
