#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "modelmap/embed.hpp"
#include "modelmap/matrix.hpp"
#include "modelmap/matrix_io.hpp"
#include "modelmap_cli/fixture.hpp"

namespace modelmap::cli {

using IdPair = std::pair<std::string, std::string>;

struct MatrixInput {
  std::filesystem::path path;
  std::optional<Format> format;
  std::optional<double> floor;

  Format resolved_format() const { return format.value_or(format_from_path(path)); }
};

/// Row filter shared by every analysis block. Empty fields match everything.
struct Selector {
  std::vector<std::string> groups;
  std::vector<std::string> ids;
  std::optional<std::int64_t> step;
  std::optional<std::int64_t> min_step;
  std::optional<std::int64_t> max_step;
  std::map<std::string, std::string> tags;

  bool matches(const ModelMeta& m) const;
  bool empty() const;
};

struct TextOutlierConfig {
  double fraction = 0.03;
  std::int64_t warmup_step = 1430;
  bool remove = true;
  bool sweep = false;
  Selector select;
};

struct PreprocessConfig {
  double clip_quantile = 0.0;
  std::vector<std::string> exclude_models;
  std::optional<TextOutlierConfig> text_outliers;
};

struct CenterConfig {
  Scale scale = Scale::bits_per_byte;
  bool recenter = false;
};

enum class PairMode { all, consecutive };

struct KlConfig {
  PairMode pairs = PairMode::all;
  /// "group", "step" (one trajectory over all selected rows) or "tag:<key>".
  std::string group_by = "group";
  Selector select;
  std::optional<std::uint64_t> subset_seed;
};

struct SummarizeSetting {
  std::string setting;
  std::vector<IdPair> pairs;
};

enum class ScanSource { weights, map };

struct CheckpointScanConfig {
  ScanSource source = ScanSource::weights;
  double k = 10.0;
  Selector select;
};

struct SeedScanConfig {
  double k = 5.0;
  Selector select;
};

struct ScalingConfig {
  std::int64_t t0 = 0;
  std::vector<std::int64_t> t0_grid;
  std::optional<std::int64_t> window_steps;
  std::size_t window_checkpoints = 10;
  std::vector<std::string> groups;
  bool exp_map = true;
  Scale exp_scale = Scale::raw_nats;
  bool plot = true;
};

enum class EmbedSource { map, weights };

struct EmbedConfig {
  std::string method = "pca";
  EmbedSource source = EmbedSource::map;
  Selector select;
  int dim = 2;
  double perplexity = 30.0;
  std::size_t iterations = 1000;
  TsneInit init = TsneInit::pca;
  std::uint64_t seed = 0;
  bool acf = true;
  bool kl_line_width = false;
};

struct ShiftConfig {
  std::vector<IdPair> pairs;
  std::size_t n_random = 1000;
  /// 0 means "all shifts", capped at 10.
  std::size_t sample_size = 0;
  std::uint64_t seed = 0;
};

struct FbmSynthConfig {
  std::vector<double> hurst;
  std::size_t n_steps = 1024;
  std::size_t dim = 16;
  std::size_t n_paths = 50;
  std::uint64_t seed = 0;
};

struct FoldingSynthConfig {
  bool identity = false;
  double alpha = 0.3;
  double lambda = 2.0;
  std::size_t k_max = 40;
  std::size_t input_dim = 16;
  std::size_t output_dim = 64;
  std::size_t n_steps = 2048;
  std::size_t n_paths = 20;
  double input_scale = 1.0 / 1048576.0;
  std::uint64_t seed = 0;
};

struct ExperimentConfig {
  /// Directory used to resolve relative input paths.
  std::filesystem::path base_dir;
  std::filesystem::path output_dir = "modelmap-out";
  std::optional<unsigned> threads;

  std::optional<MatrixInput> loglik;
  std::optional<MatrixInput> map;
  std::optional<MatrixInput> weights;
  std::optional<FixtureSpec> fixture;

  PreprocessConfig preprocess;
  CenterConfig center;
  std::optional<KlConfig> kl;
  std::optional<std::vector<SummarizeSetting>> summarize;
  std::optional<CheckpointScanConfig> checkpoint_scan;
  std::optional<SeedScanConfig> seed_scan;
  std::optional<ScalingConfig> scaling;
  std::optional<EmbedConfig> embed;
  std::optional<ShiftConfig> shift;
  std::optional<FbmSynthConfig> fbm;
  std::optional<FoldingSynthConfig> folding;

  bool has_loglik_source() const { return loglik.has_value() || fixture.has_value(); }
  bool has_map_source() const { return has_loglik_source() || map.has_value(); }
  bool has_weights_source() const { return weights.has_value() || fixture.has_value(); }
};

/// The published configuration schema (draft-04), compiled into the binary.
const std::string& config_schema();

/// Validates `doc` against the schema, then checks cross-field rules and
/// that referenced input files exist. Throws ConfigError.
ExperimentConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir);

ExperimentConfig load_config(const std::filesystem::path& path);

/// Replaces every block seed (global --seed).
void override_seeds(ExperimentConfig& cfg, std::uint64_t seed);

}  // namespace modelmap::cli
