#pragma once

#include <iosfwd>

namespace psopdf::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitNumerical = 3;

/// Entry point of the psopdf executable. Subcommands: train, eval, compare,
/// point-demo, diverge-demo, diff-check.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace psopdf::cli
