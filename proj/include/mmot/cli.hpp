#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace mmot::cli {

enum ExitCode : int { kOk = 0, kIoError = 1, kValidationError = 2, kSolverFailure = 3 };

inline const std::vector<std::string> kCommands{"solve", "dissociate", "taylor-check", "monge-check",
                                                "dirac-demo"};

struct Invocation {
  std::string command;
  std::filesystem::path config;
  std::filesystem::path out = "mmot-out";
  /// Overrides the config "seed" / "backend" fields when set.
  std::optional<std::uint64_t> seed;
  std::optional<std::string> backend;
};

/// Loads and validates the config, runs the command, writes its artifacts and
/// manifest.json into `inv.out`. Diagnostics go to `err`, a one-line summary to `out`.
int run(const Invocation& inv, std::ostream& out, std::ostream& err);

/// argv front end: `mmot <command> --config <path> [--out <dir>] [--seed <u64>] [--backend lp|entropic]`.
int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace mmot::cli
