#pragma once

#include <iosfwd>

namespace evorep::cli {

enum ExitCode : int {
  kOk = 0,
  kInternal = 1,
  kUsage = 2,      // unknown flag, missing argument, bad value
  kConfig = 3,     // malformed config file or inconsistent settings
  kData = 4,       // unreadable or invalid input data
  kTraining = 5,   // network training diverged
  kDimension = 6,  // shape mismatch between inputs
};

/// Parses argv, runs one subcommand and returns its exit code. Diagnostics
/// go to `err`, the resolved configuration and reports to `out`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace evorep::cli
