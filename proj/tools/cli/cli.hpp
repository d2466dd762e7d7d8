#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace mlta::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitDataError = 1;
inline constexpr int kExitFitFailed = 2;

/// Runs one `mlta` subcommand. `args` excludes the program name.
/// Returns 0 on success, 1 on data or argument errors and 2 when every
/// start of a fit degenerated.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// "1..5", "1,3,5" or "2".
std::vector<int> parse_int_list(const std::string& text);

}  // namespace mlta::cli
