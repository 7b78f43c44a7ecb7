#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace eitmem {

/// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitSolver = 3;

/// Runs the tool on argv[1..]. Help and tables go to `out`, diagnostics to
/// `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

std::vector<std::string> subcommand_names();

/// Every long and short flag the named subcommand's parser accepts.
std::vector<std::string> accepted_flags(const std::string& subcommand);

}  // namespace eitmem
