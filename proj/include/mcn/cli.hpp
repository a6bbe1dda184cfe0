// Command-line front end: certified-net builders, error sweeps, bound
// calculators, and the landscape experiments, emitting CSV/JSON artifacts.
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace mcn::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitVerdict = 1;
inline constexpr int kExitUsage = 2;

/// One resolved invocation: the leaf command, its effective parameters
/// (defaults overridden by the config file overridden by flags), the master
/// seed when one was given, the directory artifacts land in, and any grid
/// resolutions. Echoed verbatim into every metadata artifact so the run can
/// be reproduced.
struct RunConfig {
  std::string command;
  std::map<std::string, std::string> params;
  std::optional<std::uint64_t> seed;
  std::filesystem::path outDir;
  std::vector<long> grid;
};

/// Runs one invocation in-process; `args` excludes the program name.
/// Artifacts are written atomically and one summary line is printed per
/// result row. Returns kExitOk, kExitVerdict when a measured check fails,
/// or kExitUsage for unknown flags, bad values, or unreadable configs.
int run(std::vector<std::string> args);

/// main()-style entry point.
int run(int argc, const char* const* argv);

}  // namespace mcn::cli
