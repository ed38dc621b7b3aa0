#pragma once

#include <iosfwd>

namespace mixlaw {

// Exit codes of the command-line tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitData = 2,
  kExitFit = 3,
};

// Entry point of the `mixlaw` tool with its streams injected, so tests run
// commands in-process.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace mixlaw
