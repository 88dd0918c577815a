#pragma once

#include <string>
#include <vector>

namespace dorsal {

inline constexpr int kExitOk = 0;
inline constexpr int kExitPartial = 1;
inline constexpr int kExitFatal = 2;

/// Entry point of the `dorsal` tool. args[0] is the program name. Returns the
/// process exit code: 0 success, 1 when some frames failed or were skipped,
/// 2 on a fatal error.
int run_cli(const std::vector<std::string>& args);

}  // namespace dorsal
