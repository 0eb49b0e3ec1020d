#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>

namespace optopulse::cli {

enum ExitCode : int { kSuccess = 0, kConfigError = 2, kNumericError = 3 };

struct RunOptions {
  std::filesystem::path config;
  std::filesystem::path out;
  std::optional<std::uint64_t> seed;  ///< overrides the config seed
  unsigned threads = 1;
};

/// Runs one subcommand (pulse, tomography, purify) and maps failures to exit
/// codes; diagnostics go to `err`, a one-line summary to `log`.
int run_command(std::string_view command, const RunOptions& options, std::ostream& log, std::ostream& err);

/// Writes `content` to a temporary sibling and renames it into place.
void write_atomic(const std::filesystem::path& file, std::string_view content);

/// Parses argv (with OPTOPULSE_* environment fallbacks) and dispatches.
int main_entry(int argc, char** argv);

}  // namespace optopulse::cli
