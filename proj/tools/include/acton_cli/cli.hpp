#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace acton::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

/// Runs one subcommand. argv[0] is the program name. Errors go to `err` as
/// `ERROR <code>: <message>`.
int dispatch(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err);
int dispatch(int argc, const char* const* argv);

}  // namespace acton::cli
