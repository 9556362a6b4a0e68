#pragma once

#include <iosfwd>

namespace coderoute::tools {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitFailure = 3;

// Parses argv and runs one subcommand. Usage errors go to `err` with the
// help text of the failing level.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace coderoute::tools
