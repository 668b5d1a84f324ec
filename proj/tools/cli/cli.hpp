#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace sidgff::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitVerdict = 2;

/// Runs one subcommand (profile, sample, cov-check, compare, tails,
/// second-moment). `args` excludes the program name. Results go to --output
/// or `out`; diagnostics and the resolved config go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace sidgff::cli
