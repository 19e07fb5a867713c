#pragma once

#include <iosfwd>

namespace drssl::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kDataError = 2,
  kNumericError = 3,
};

// Entry point behind the drssl executable. Progress goes to `out`, usage and
// diagnostics to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace drssl::cli
