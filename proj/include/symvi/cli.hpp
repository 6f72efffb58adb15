#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace symvi {

// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitNumeric = 3;

// Runs `symvi <fit|diagnose|reproduce> [flags]` with args excluding the
// program name. Never throws; returns the exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace symvi
