#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace transgcr::cli {

/// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kComputationFailed = 1;
inline constexpr int kBadConfig = 2;

/// Runs the command line `args` (args[0] is the program name). Reports go to
/// `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace transgcr::cli
