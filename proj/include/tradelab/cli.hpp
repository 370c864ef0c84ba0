#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace tradelab {

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitMissingInput = 2,
  kExitRefusedOverwrite = 3,
};

/// Runs one command (fetch, train, backtest, report). `args` excludes the
/// program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace tradelab
