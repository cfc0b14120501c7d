#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "permsig/error.hpp"

namespace permsig::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitNumerical = 3;
inline constexpr int kExitMismatch = 4;

int exit_code_for(ErrorCode code);

// Hex FNV-1a digest over the bytes of the given files, in order.
std::string file_digest(const std::vector<std::filesystem::path>& paths);

// Runs the tool. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace permsig::cli
