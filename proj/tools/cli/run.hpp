#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace conceptforge::cli {

/// Exit statuses of run_subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;  // data errors, failed selfcheck
inline constexpr int kExitUsage = 2;

/// Runs `conceptforge <args...>`; args excludes the program name.
int run_subcommand(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace conceptforge::cli
