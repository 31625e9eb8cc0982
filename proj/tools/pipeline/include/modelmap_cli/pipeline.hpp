#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "modelmap_cli/config.hpp"

namespace modelmap::cli {

struct RunOptions {
  unsigned threads = 1;
  /// Progress and warnings; nullptr silences them.
  std::ostream* log = nullptr;
  /// Recorded in the manifest.
  std::string command = "run";
  std::optional<std::filesystem::path> config_path;
  /// Also write the preprocessed log-likelihood matrix as matrix.mmap or matrix.csv.
  std::optional<Format> export_matrix;
};

struct RunResult {
  std::filesystem::path output_dir;
  std::vector<std::string> files;
  std::vector<std::string> warnings;
};

/// Executes every configured block in dependency order and writes
/// manifest.json last.
RunResult run_experiment(const ExperimentConfig& cfg, const RunOptions& options);

/// --threads flag, then config value, then MODELMAP_THREADS, then 1.
unsigned resolve_threads(std::optional<unsigned> flag, std::optional<unsigned> config);

}  // namespace modelmap::cli
