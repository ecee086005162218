#pragma once

#include <iosfwd>

namespace mminfer {

// Exit codes returned by cli_dispatch.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNonconverged = 4;

int cli_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int cli_dispatch(int argc, const char* const* argv);

} // namespace mminfer
