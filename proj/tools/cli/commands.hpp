#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace cpsfuse::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

/// args excludes the program name. Returns the process exit code:
/// 0 success, 1 usage or configuration error, 2 data error.
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cpsfuse::cli
