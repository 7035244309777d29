#pragma once

#include <ostream>

namespace censreg::cli {

// Process exit statuses.
enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kParse = 2,
  kSchema = 3,
  kData = 4,
  kEstimation = 5,   // domain or singular failures
  kConvergence = 6,
  kInternal = 70,
};

// Entry point shared by the executable and the tests. argv[0] is the program name.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace censreg::cli
