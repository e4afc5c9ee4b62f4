#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace segvirt::cli {

enum ExitCode : int {
  kOk = 0,
  kTranslationFault = 1,
  kUsage = 2,
  kParse = 3,
  kAnomalies = 4,
  kIo = 5,
};

/// Runs the command line `args` (args[0] is the program name). Normal output
/// goes to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace segvirt::cli
