#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "modelmap/matrix.hpp"

namespace modelmap {

/// Squared-distance KL estimate between two rows of a centered map.
/// Units follow the map: bits/byte for rescaled maps, nats otherwise.
struct KlEstimate {
  double value = 0.0;
  double std_error = 0.0;
  /// Value before clamping at zero.
  double raw_value = 0.0;
  std::size_t i = 0;
  std::size_t j = 0;
  /// The standard-error radicand was negative and clamped at zero.
  bool se_radicand_clamped = false;
};

KlEstimate kl_pair(const CenteredMap& c, std::size_t i, std::size_t j);

struct KlMatrixResult {
  /// Indices into the source map, one per row/column.
  std::vector<std::size_t> indices;
  std::vector<std::string> model_ids;
  Matrix value;
  Matrix std_error;
  Scale scale = Scale::raw_nats;
  std::size_t clamped_radicands = 0;
};

/// All pairs over `subset` (every row when empty). Pairs are evaluated on up
/// to `threads` workers; each pair is written to its own slot, so the result
/// does not depend on scheduling.
KlMatrixResult kl_matrix(const CenteredMap& c,
                         std::optional<std::vector<std::size_t>> subset = std::nullopt,
                         unsigned threads = 1);

struct ConsecutiveKl {
  std::int64_t step_from = 0;
  std::int64_t step_to = 0;
  std::string model_from;
  std::string model_to;
  KlEstimate estimate;
};

/// KL between successive checkpoints of `rows` (every row when empty),
/// ordered by training step. Every selected row must carry a step.
std::vector<ConsecutiveKl> consecutive_kl(const CenteredMap& c,
                                          std::vector<std::size_t> rows = {});

struct EntropyBound {
  double bits_per_byte = 0.0;
  std::size_t model_index = 0;
  std::string model_id;
};

/// min over models of -mean(l_i) / (Bbar ln 2).
EntropyBound entropy_upper_bound(const LogLikelihoodMatrix& m);

/// Pearson correlation of per-pair KL computed independently on two column
/// subsets, each double-centered on its own.
double subset_correlation(const LogLikelihoodMatrix& m, const std::vector<std::size_t>& columns_a,
                          const std::vector<std::size_t>& columns_b,
                          const std::vector<std::pair<std::size_t, std::size_t>>& pairs);

struct GroupSummary {
  std::string setting;
  double median = 0.0;
  double mean = 0.0;
  double sd = 0.0;  // population
  std::size_t n = 0;
};

GroupSummary group_summary(std::span<const double> values, std::string setting = {});

}  // namespace modelmap
