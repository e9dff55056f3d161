#pragma once

#include <string>
#include <vector>

namespace mstlab {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitEstimation = 3;
inline constexpr int kExitProvenance = 4;

// Batch front-end. Subcommands: spectrum, simulate, tails, constants,
// validate. Returns the process exit code; never throws.
int run_cli(const std::vector<std::string>& args);

}  // namespace mstlab
