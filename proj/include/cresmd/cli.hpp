#pragma once

#include <iosfwd>

namespace cresmd {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 2,
  kExitIo = 3,
  kExitRange = 4,
  kExitNumeric = 5,
};

// Entry point of the `cresmd` executable. Output goes to `out`, warnings
// and errors to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace cresmd
