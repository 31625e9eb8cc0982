#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "modelmap/matrix.hpp"

namespace modelmap {

enum class Format { binary, csv };

/// Parses "binary"/"bin"/"mmap" or "csv"; throws ConfigError otherwise.
Format parse_format(const std::string& name);

/// Picks the format from the extension: ".csv" is CSV, anything else binary.
Format format_from_path(const std::filesystem::path& path);

struct LoadOptions {
  /// When set, entries below this value (including -inf) are clamped to it
  /// instead of being rejected.
  std::optional<double> floor;
};

/// Sidecar path for a matrix file: same stem, ".meta.json" suffix.
std::filesystem::path sidecar_path(const std::filesystem::path& path);

/// Loads a matrix and its sidecar. Missing sidecar yields synthetic metadata
/// and sets LogLikelihoodMatrix::synthetic_metadata().
LogLikelihoodMatrix load_matrix(const std::filesystem::path& path, Format format,
                                const LoadOptions& options = {});

/// Writes the matrix and its sidecar. CSV values use 17 significant digits.
void save_matrix(const LogLikelihoodMatrix& m, const std::filesystem::path& path, Format format);

/// Maps are stored in the same container; the sidecar records the scale and
/// whether centering was inherited.
void save_map(const CenteredMap& c, const std::filesystem::path& path, Format format);
CenteredMap load_map(const std::filesystem::path& path, Format format);

/// Raw container access: magic "MMAP1", u8 version, u32 K, u32 N, K*N f64, all little-endian.
void write_container(const Matrix& values, const std::filesystem::path& path);
Matrix read_container(const std::filesystem::path& path);

}  // namespace modelmap
