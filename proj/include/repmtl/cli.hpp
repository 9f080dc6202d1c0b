#pragma once

#include <filesystem>
#include <optional>
#include <string>

namespace repmtl::cli {

enum ExitCode : int {
  kOk = 0,
  kRuntimeFailure = 1,
  kInvalidInput = 2,
  kNoRank = 3,
};

struct Invocation {
  std::filesystem::path config;
  /// Output directory. Falls back to the config's "output_dir".
  std::optional<std::filesystem::path> out;
  /// Worker threads; 0 means one per hardware thread.
  unsigned threads = 1;
};

int cmd_simulate(const Invocation& inv);
int cmd_fit(const Invocation& inv);
int cmd_transfer(const Invocation& inv);
int cmd_rank(const Invocation& inv);

/// `--threads` wins; otherwise REPMTL_THREADS; otherwise 1. 0 resolves to the
/// hardware concurrency.
unsigned resolve_threads(std::optional<unsigned> flag);

/// Parses argv and dispatches to a subcommand. Returns the process exit code.
int run(int argc, char** argv);

}  // namespace repmtl::cli
