#pragma once

#include <iosfwd>
#include <map>
#include <string>

namespace aidi::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitNumeric = 2;

/// `key = value` lines, '#' comments. Keys are long flag names without the
/// leading dashes; '_' and '-' are interchangeable.
std::map<std::string, std::string> parse_config(std::istream& in);

/// Entry point of the `aidi` tool. Subcommands: invert, reconstruct, edit,
/// grid.
int run(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace aidi::cli
