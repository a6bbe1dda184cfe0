// Artifact plumbing: atomic file writes, the fixed-header experiment CSV,
// and flat key-value / JSON run-config files.
#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "mcn/experiments.hpp"

namespace mcn {

/// Reads a whole file as text, naming the path in error messages.
std::string readTextFile(const std::filesystem::path& path);

/// Writes `content` through a temp file in the target directory followed by
/// an atomic rename, creating parent directories as needed. A run killed
/// mid-write never leaves a truncated file at `path`.
void atomicWriteFile(const std::filesystem::path& path,
                     const std::string& content);

/// Creates `dir` (and parents) if missing and verifies a file can actually
/// be created inside it.
void ensureWritableDir(const std::filesystem::path& dir);

/// The one CSV header every experiment artifact uses.
inline constexpr const char* kCsvHeader =
    "experiment,depth|n,restart,final_loss,grad_norm,wall_ms,verdict";

/// Renders rows under the fixed header. Reals use the shortest decimal that
/// round-trips, so identical runs produce byte-identical files.
std::string renderCsv(const std::vector<ExperimentRow>& rows);

/// Parses a run config: flat `key = value` lines (`#` comments, optional
/// quotes around values) or, when the first non-space character is `{`, a
/// flat JSON object whose scalar values are stringified and whose scalar
/// arrays are comma-joined. `name` labels parse errors; sections, nesting,
/// and duplicate keys are rejected with line numbers.
std::map<std::string, std::string> parseConfigText(const std::string& text,
                                                   const std::string& name);

/// parseConfigText applied to the file's contents.
std::map<std::string, std::string> loadConfigFile(
    const std::filesystem::path& path);

}  // namespace mcn
