#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace stablescale {

inline constexpr const char* kVersion = "0.1.0";

enum ExitCode : int { kExitOk = 0, kExitFailure = 1, kExitUsage = 2, kExitIo = 3 };

/// Entry point of the stablescale command line. args[0] is the program name.
/// Subcommands: validate, simulate, average, converge, sweep.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace stablescale
