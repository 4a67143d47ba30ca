#pragma once

#include <iosfwd>

namespace ppmc {

// Exit codes of the ppmc command.
enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,      // run failed or replay mismatch
  kExitUsage = 2,        // bad flags
  kExitMissingFile = 3,  // policy, config or trajectory not found
  kExitBadInput = 4,     // malformed config, policy or metadata
};

// Entry point for `ppmc <train|eval|replay|serve|heightmap> ...`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ppmc
