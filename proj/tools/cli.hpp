#pragma once

#include <iosfwd>

namespace rpf::cli {

// Exit codes: 0 success, 1 usage or config error, 2 data or model error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace rpf::cli
