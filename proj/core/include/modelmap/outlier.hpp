#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "modelmap/divergence.hpp"
#include "modelmap/matrix.hpp"

namespace modelmap {

inline constexpr std::int64_t kDefaultWarmupSteps = 1430;
inline constexpr double kDefaultTextRemovalFraction = 0.03;
inline constexpr double kDefaultCheckpointMadK = 10.0;
inline constexpr double kDefaultSeedMadK = 5.0;
/// Ratio-to-median rule used when the MAD is zero.
inline constexpr double kZeroMadRatio = 100.0;

struct TextOutlierReport {
  /// max over (trajectory, consecutive step pair) of |l_{t+1}(x) - l_t(x)|, nats.
  std::vector<double> max_score;
  /// Population SD of the same absolute differences.
  std::vector<double> sd_score;
  /// Text indices by max_score descending, ties by index ascending.
  std::vector<std::size_t> ranking;
  std::size_t removal_count = 0;
  std::size_t pairs_used = 0;
  std::int64_t post_warmup_step = kDefaultWarmupSteps;
  /// Pearson r between max_score and sd_score (NaN when undefined).
  double max_sd_correlation = 0.0;

  std::vector<std::size_t> removal_set() const;
};

/// Each trajectory is one model size's checkpoints (rows with steps, any
/// order); all must share the same texts. Consecutive pairs whose earlier
/// step is below `post_warmup_step` are skipped.
TextOutlierReport text_outlier_scores(std::span<const LogLikelihoodMatrix> trajectories,
                                      std::int64_t post_warmup_step = kDefaultWarmupSteps,
                                      double removal_fraction = kDefaultTextRemovalFraction);

/// Drops columns; byte lengths and the mean text length are recomputed.
LogLikelihoodMatrix remove_texts(const LogLikelihoodMatrix& m,
                                 const std::vector<std::size_t>& text_indices);

struct SweepCurve {
  std::size_t removed = 0;
  std::vector<ConsecutiveKl> kl;
};

/// Consecutive-checkpoint KL (bits/byte) after removing the top `counts`
/// texts of `ranking`, for rows with step >= `from_step`.
std::vector<SweepCurve> removal_sweep(const LogLikelihoodMatrix& trajectory,
                                      const std::vector<std::size_t>& ranking,
                                      const std::vector<std::size_t>& counts,
                                      std::int64_t from_step = 0);

/// Sweep sizes {10, 100, 200, ..., 1000}, keeping those below n.
std::vector<std::size_t> default_sweep_counts(std::size_t num_texts);

struct AnomalyScan {
  std::vector<std::int64_t> steps;
  std::vector<double> statistic;
  std::vector<std::int64_t> flagged_steps;
  double median = 0.0;
  double mad = 0.0;
  double threshold = 0.0;
  /// "median+k*mad" or "ratio_to_median".
  std::string rule;
};

AnomalyScan checkpoint_anomaly_scan(std::span<const std::int64_t> steps,
                                    std::span<const double> statistic,
                                    double k = kDefaultCheckpointMadK);

struct SeedScan {
  std::vector<double> row_medians;
  std::vector<std::size_t> flagged;  // positions in the KL matrix
  std::vector<std::string> flagged_ids;
  double threshold = 0.0;
  std::string rule;
};

SeedScan seed_anomaly_scan(const KlMatrixResult& kl, double k = kDefaultSeedMadK);

/// Squared Euclidean distance between successive rows (ordered by step),
/// indexed by the earlier step. Used for weight-space checkpoint scans.
std::vector<std::pair<std::int64_t, double>> consecutive_sq_distances(
    const LogLikelihoodMatrix& trajectory);

}  // namespace modelmap
