#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace miglmm {

/// Exit codes of the command-line tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitInternal = 1,
  kExitConfig = 2,
  kExitData = 3,
  kExitNumeric = 4,
  kExitAcceptance = 5,
};

/// Runs the tool on args (without the program name). Results go to out,
/// progress and errors to err. Never throws; returns an ExitCode.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace miglmm
