#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace veryfl::cli {

// Exit codes shared by every subcommand.
enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,  // runtime failure, replay failure, unknown token, parse failure
  kExitConfig = 2,   // config or usage error
  kExitNotOwned = 3,
};

// Entry point behind the `veryfl` binary. args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace veryfl::cli
