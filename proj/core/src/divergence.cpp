#include "modelmap/divergence.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <limits>

#include "modelmap/error.hpp"
#include "modelmap/parallel.hpp"
#include "modelmap/stats.hpp"

namespace modelmap {

KlEstimate kl_pair(const CenteredMap& c, std::size_t i, std::size_t j) {
  const std::size_t k = c.num_models();
  if (i >= k || j >= k) {
    throw AnalysisError("model index out of range (" + std::to_string(std::max(i, j)) +
                        " >= " + std::to_string(k) + ")");
  }
  KlEstimate est;
  est.i = i;
  est.j = j;
  if (i == j) return est;

  const auto& q = c.coords();
  const auto n = static_cast<double>(c.num_texts());
  // Fixed summation order regardless of (i, j) orientation: squares are symmetric.
  const auto lo = static_cast<Eigen::Index>(std::min(i, j));
  const auto hi = static_cast<Eigen::Index>(std::max(i, j));
  double sum2 = 0.0;
  double sum4 = 0.0;
  for (Eigen::Index s = 0; s < q.cols(); ++s) {
    const double d = q(lo, s) - q(hi, s);
    const double d2 = d * d;
    sum2 += d2;
    sum4 += d2 * d2;
  }

  double radicand = 0.0;
  if (c.scale() == Scale::bits_per_byte) {
    est.raw_value = sum2;
    radicand = sum4 - sum2 * sum2 / n;
  } else {
    est.raw_value = sum2 / (2.0 * n);
    radicand = sum4 / (4.0 * n * n) - est.raw_value * est.raw_value / n;
  }
  est.value = std::max(est.raw_value, 0.0);
  if (radicand < 0.0) {
    est.se_radicand_clamped = true;
    radicand = 0.0;
  }
  est.std_error = std::sqrt(radicand);
  return est;
}

KlMatrixResult kl_matrix(const CenteredMap& c, std::optional<std::vector<std::size_t>> subset,
                         unsigned threads) {
  KlMatrixResult out;
  out.scale = c.scale();
  if (subset && !subset->empty()) {
    out.indices = *subset;
  } else {
    out.indices.resize(c.num_models());
    for (std::size_t i = 0; i < out.indices.size(); ++i) out.indices[i] = i;
  }
  for (std::size_t idx : out.indices) {
    if (idx >= c.num_models()) throw AnalysisError("subset index out of range");
    out.model_ids.push_back(c.models()[idx].id);
  }
  const auto k = static_cast<Eigen::Index>(out.indices.size());
  out.value = Matrix::Zero(k, k);
  out.std_error = Matrix::Zero(k, k);
  std::vector<char> clamped(static_cast<std::size_t>(k * k), 0);

  auto work = [&](Eigen::Index row) {
    for (Eigen::Index col = row + 1; col < k; ++col) {
      const auto est = kl_pair(c, out.indices[static_cast<std::size_t>(row)],
                               out.indices[static_cast<std::size_t>(col)]);
      out.value(row, col) = out.value(col, row) = est.value;
      out.std_error(row, col) = out.std_error(col, row) = est.std_error;
      clamped[static_cast<std::size_t>(row * k + col)] = est.se_radicand_clamped ? 1 : 0;
    }
  };

  parallel_for(static_cast<std::size_t>(k), threads,
               [&](std::size_t row) { work(static_cast<Eigen::Index>(row)); });
  for (char f : clamped) out.clamped_radicands += static_cast<std::size_t>(f);
  return out;
}

std::vector<ConsecutiveKl> consecutive_kl(const CenteredMap& c, std::vector<std::size_t> rows) {
  if (rows.empty()) {
    rows.resize(c.num_models());
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  }
  if (rows.size() < 2) throw AnalysisError("consecutive KL needs at least two checkpoints");
  for (std::size_t r : rows) {
    if (r >= c.num_models()) throw AnalysisError("model index out of range");
    if (!c.models()[r].step) {
      throw AnalysisError("model '" + c.models()[r].id + "' has no training step");
    }
  }
  std::stable_sort(rows.begin(), rows.end(), [&](std::size_t a, std::size_t b) {
    return *c.models()[a].step < *c.models()[b].step;
  });
  std::vector<ConsecutiveKl> out;
  out.reserve(rows.size() - 1);
  for (std::size_t t = 0; t + 1 < rows.size(); ++t) {
    const auto& from = c.models()[rows[t]];
    const auto& to = c.models()[rows[t + 1]];
    out.push_back({*from.step, *to.step, from.id, to.id, kl_pair(c, rows[t], rows[t + 1])});
  }
  return out;
}

EntropyBound entropy_upper_bound(const LogLikelihoodMatrix& m) {
  if (m.num_models() == 0 || m.num_texts() == 0) throw AnalysisError("empty matrix");
  const double mean_bytes = m.texts().mean_bytes();
  EntropyBound best;
  best.bits_per_byte = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < m.num_models(); ++i) {
    const double nll = -m.values().row(static_cast<Eigen::Index>(i)).mean();
    const double bpb = nll / (mean_bytes * std::numbers::ln2);
    if (bpb < best.bits_per_byte) {
      best.bits_per_byte = bpb;
      best.model_index = i;
    }
  }
  best.model_id = m.models()[best.model_index].id;
  return best;
}

double subset_correlation(const LogLikelihoodMatrix& m, const std::vector<std::size_t>& columns_a,
                          const std::vector<std::size_t>& columns_b,
                          const std::vector<std::pair<std::size_t, std::size_t>>& pairs) {
  if (columns_a.size() < 2 || columns_b.size() < 2) {
    throw AnalysisError("each text subset needs at least two texts");
  }
  if (pairs.size() < 2) throw AnalysisError("subset correlation needs at least two model pairs");
  const auto map_a = rescale_bits_per_byte(double_center(keep_columns(m, columns_a)));
  const auto map_b = rescale_bits_per_byte(double_center(keep_columns(m, columns_b)));
  std::vector<double> kl_a, kl_b;
  kl_a.reserve(pairs.size());
  kl_b.reserve(pairs.size());
  for (const auto& [i, j] : pairs) {
    kl_a.push_back(kl_pair(map_a, i, j).value);
    kl_b.push_back(kl_pair(map_b, i, j).value);
  }
  return stats::pearson(kl_a, kl_b);
}

GroupSummary group_summary(std::span<const double> values, std::string setting) {
  if (values.empty()) throw AnalysisError("group summary of an empty group");
  GroupSummary s;
  s.setting = std::move(setting);
  s.median = stats::median(values);
  s.mean = stats::mean(values);
  s.sd = stats::population_sd(values);
  s.n = values.size();
  return s;
}

}  // namespace modelmap
