#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace radial::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitDomain = 1;
inline constexpr int kExitUsage = 2;

/// Environment variable naming the default output directory.
inline constexpr const char* kOutDirEnv = "RADIAL_OUT_DIR";

/// Parses `args` (without the program name), runs one subcommand and writes
/// its files. Returns the process exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

std::string build_id();

}  // namespace radial::cli
