#pragma once

#include <string>
#include <vector>

namespace docrl::cli {

/// Exit codes: 0 success, 1 data error, 2 usage or configuration error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitData = 1;
inline constexpr int kExitConfig = 2;

int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args);  // args[0] is the program name

}  // namespace docrl::cli
