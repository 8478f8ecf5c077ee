#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace gcm::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitInput = 2;
inline constexpr int kExitNumeric = 3;

// Runs one command. `args` excludes the program name. Results go to `out`
// (or the --out file), diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace gcm::cli
