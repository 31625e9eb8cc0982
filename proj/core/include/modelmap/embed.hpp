#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "modelmap/matrix.hpp"

namespace modelmap {

enum class TsneInit { pca, random };

struct TsneParams {
  int dim = 2;
  double perplexity = 30.0;
  std::uint64_t seed = 0;
  std::size_t iterations = 1000;
  double early_exaggeration = 12.0;
  std::size_t exaggeration_iterations = 250;
  /// Defaults to K / 12 clamped to [50, 500].
  std::optional<double> learning_rate;
  double momentum_initial = 0.5;
  double momentum_final = 0.8;
  std::size_t momentum_switch = 250;
  TsneInit init = TsneInit::pca;
  /// Perplexity search tolerance on row entropy, in bits.
  double entropy_tolerance = 1e-5;
  /// Objective is recorded every this many iterations.
  std::size_t objective_every = 50;
};

struct Embedding {
  Matrix coords;  // K x n
  std::string method;
  /// PCA only: explained variance ratios (descending) and unit-norm
  /// components, one per column of `components` (N x n).
  std::vector<double> explained_variance_ratio;
  Matrix components;
  Eigen::RowVectorXd mean;
  /// t-SNE only.
  TsneParams params;
  double initial_objective = 0.0;
  double final_objective = 0.0;
  std::vector<std::pair<std::size_t, double>> objective_history;
  std::vector<std::string> warnings;
};

/// PCA through the K x K Gram matrix of the column-centered data.
/// Numerically null directions are dropped with a warning.
Embedding pca(const Matrix& data, std::size_t n_components);

struct TsneAffinities {
  Matrix conditional;  // rows sum to 1
  Matrix joint;        // symmetric, sums to 1
  std::vector<double> row_entropy_bits;
  std::vector<double> beta;  // precision per point
};

/// Gaussian conditionals whose row entropies match log2(perplexity).
TsneAffinities tsne_affinities(const Matrix& sq_distances, double perplexity,
                               double entropy_tolerance = 1e-5);

/// KL(P || Q) for a joint P and embedding Y.
double tsne_objective(const Matrix& joint, const Matrix& y);

/// Exact gradient of tsne_objective with respect to Y.
Matrix tsne_gradient(const Matrix& joint, const Matrix& y);

Embedding tsne_from_coords(const Matrix& coords, const TsneParams& params);
/// `distances` are plain (not squared) pairwise distances.
Embedding tsne_from_distances(const Matrix& distances, const TsneParams& params);

Matrix pairwise_sq_distances(const Matrix& coords);

/// Rotates (and optionally reflects) centered `coords` onto centered
/// `reference` by orthogonal Procrustes. Rows correspond one-to-one.
Matrix procrustes_align(const Matrix& coords, const Matrix& reference, bool allow_reflection = false);

struct AcfResult {
  std::vector<std::size_t> lags;
  std::vector<double> values;
  /// Interpolated lags of sign changes.
  std::vector<double> zero_crossings;
  std::size_t series_length = 0;
};

/// Mean-removed ACF normalized by the lag-0 sum (biased). Lags 0..max_lag,
/// max_lag defaults to n / 2.
AcfResult autocorrelation(std::span<const double> series,
                          std::optional<std::size_t> max_lag = std::nullopt);

struct SpiralPeriod {
  std::optional<std::size_t> lag;
  double peak_value = 0.0;
  std::string reason;  // set when no period is reported
};

/// Lag of the ACF maximum strictly between the second and third zero
/// crossings. The peak must exceed 3 / sqrt(n) to count as a period.
SpiralPeriod spiral_period(const AcfResult& acf);

struct ShiftVector {
  std::string base_id;
  std::string variant_id;
  std::string group;
  Vector diff;
};

struct ShiftSet {
  std::vector<ShiftVector> shifts;
};

ShiftSet shift_vectors(const CenteredMap& c,
                       const std::vector<std::pair<std::string, std::string>>& pairs);

struct GroupCosine {
  double mean = 0.0;
  std::size_t pairs = 0;
};

struct CosineReport {
  std::map<std::string, GroupCosine> groups;
  double random_baseline = 0.0;
  std::size_t n_random = 0;
  std::size_t sample_size = 0;
  std::size_t skipped_zero_norm = 0;
};

double cosine_similarity(const Vector& a, const Vector& b);

CosineReport cosine_similarity_report(const ShiftSet& s, std::size_t n_random,
                                      std::size_t sample_size, std::uint64_t seed);

}  // namespace modelmap
