#pragma once

#include <iosfwd>

namespace modelmap::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitAnalysis = 4;

/// Entry point of the `modelmap` executable. Errors are reported as one JSON
/// object on `err` and mapped to the exit codes above.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace modelmap::cli
