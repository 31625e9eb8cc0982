#include "modelmap/outlier.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "modelmap/error.hpp"
#include "modelmap/stats.hpp"

namespace modelmap {

namespace {

std::vector<std::size_t> rows_by_step(const LogLikelihoodMatrix& m) {
  std::vector<std::size_t> rows(m.num_models());
  std::iota(rows.begin(), rows.end(), 0);
  for (std::size_t r : rows) {
    if (!m.models()[r].step) {
      throw AnalysisError("model '" + m.models()[r].id + "' has no training step");
    }
  }
  std::stable_sort(rows.begin(), rows.end(), [&](std::size_t a, std::size_t b) {
    return *m.models()[a].step < *m.models()[b].step;
  });
  return rows;
}

struct Threshold {
  double median = 0.0;
  double mad = 0.0;
  double value = 0.0;
  std::string rule;
};

Threshold robust_threshold(std::span<const double> xs, double k) {
  Threshold t;
  t.median = stats::median(xs);
  t.mad = stats::mad(xs);
  if (t.mad > 0.0) {
    t.value = t.median + k * t.mad;
    t.rule = "median+k*mad";
  } else {
    t.value = kZeroMadRatio * std::max(t.median, 0.0);
    t.rule = "ratio_to_median";
  }
  return t;
}

}  // namespace

std::vector<std::size_t> TextOutlierReport::removal_set() const {
  return {ranking.begin(), ranking.begin() + static_cast<std::ptrdiff_t>(removal_count)};
}

TextOutlierReport text_outlier_scores(std::span<const LogLikelihoodMatrix> trajectories,
                                      std::int64_t post_warmup_step, double removal_fraction) {
  if (trajectories.empty()) throw AnalysisError("no trajectories given");
  if (!(removal_fraction >= 0.0 && removal_fraction < 1.0)) {
    throw AnalysisError("removal fraction must lie in [0, 1)");
  }
  const std::size_t n = trajectories.front().num_texts();
  for (const auto& t : trajectories) {
    if (t.num_models() < 2) throw AnalysisError("trajectory with fewer than 2 checkpoints");
    if (t.num_texts() != n || t.texts().ids() != trajectories.front().texts().ids()) {
      throw AnalysisError("trajectories do not share the same texts");
    }
  }

  TextOutlierReport rep;
  rep.post_warmup_step = post_warmup_step;
  rep.max_score.assign(n, 0.0);
  std::vector<double> sum(n, 0.0), sum_sq(n, 0.0);
  for (const auto& t : trajectories) {
    const auto rows = rows_by_step(t);
    for (std::size_t r = 0; r + 1 < rows.size(); ++r) {
      if (*t.models()[rows[r]].step < post_warmup_step) continue;
      ++rep.pairs_used;
      const auto a = t.values().row(static_cast<Eigen::Index>(rows[r]));
      const auto b = t.values().row(static_cast<Eigen::Index>(rows[r + 1]));
      for (std::size_t s = 0; s < n; ++s) {
        const double d = std::abs(b(static_cast<Eigen::Index>(s)) - a(static_cast<Eigen::Index>(s)));
        rep.max_score[s] = std::max(rep.max_score[s], d);
        sum[s] += d;
        sum_sq[s] += d * d;
      }
    }
  }
  if (rep.pairs_used == 0) {
    throw AnalysisError("no consecutive checkpoint pairs at or after step " +
                        std::to_string(post_warmup_step));
  }
  rep.sd_score.resize(n);
  const auto p = static_cast<double>(rep.pairs_used);
  for (std::size_t s = 0; s < n; ++s) {
    const double m = sum[s] / p;
    rep.sd_score[s] = std::sqrt(std::max(sum_sq[s] / p - m * m, 0.0));
  }
  rep.ranking.resize(n);
  std::iota(rep.ranking.begin(), rep.ranking.end(), 0);
  std::stable_sort(rep.ranking.begin(), rep.ranking.end(), [&](std::size_t a, std::size_t b) {
    return rep.max_score[a] > rep.max_score[b];
  });
  rep.removal_count = static_cast<std::size_t>(std::llround(removal_fraction * static_cast<double>(n)));
  rep.removal_count = std::min(rep.removal_count, n - 1);
  try {
    rep.max_sd_correlation = stats::pearson(rep.max_score, rep.sd_score);
  } catch (const AnalysisError&) {
    rep.max_sd_correlation = std::numeric_limits<double>::quiet_NaN();
  }
  return rep;
}

LogLikelihoodMatrix remove_texts(const LogLikelihoodMatrix& m,
                                 const std::vector<std::size_t>& text_indices) {
  if (text_indices.empty()) return m;
  return remove_columns(m, text_indices);
}

std::vector<std::size_t> default_sweep_counts(std::size_t num_texts) {
  std::vector<std::size_t> counts;
  for (std::size_t c : {10, 100, 200, 300, 400, 500, 600, 700, 800, 900, 1000}) {
    if (c < num_texts) counts.push_back(c);
  }
  return counts;
}

std::vector<SweepCurve> removal_sweep(const LogLikelihoodMatrix& trajectory,
                                      const std::vector<std::size_t>& ranking,
                                      const std::vector<std::size_t>& counts,
                                      std::int64_t from_step) {
  std::vector<SweepCurve> curves;
  for (std::size_t count : counts) {
    if (count > ranking.size()) throw AnalysisError("sweep count exceeds ranking length");
    const std::vector<std::size_t> drop(ranking.begin(), ranking.begin() + static_cast<std::ptrdiff_t>(count));
    const auto reduced = remove_texts(trajectory, drop);
    const auto map = rescale_bits_per_byte(double_center(reduced));
    std::vector<std::size_t> rows;
    for (std::size_t r = 0; r < map.num_models(); ++r) {
      const auto& step = map.models()[r].step;
      if (step && *step >= from_step) rows.push_back(r);
    }
    curves.push_back({count, consecutive_kl(map, rows)});
  }
  return curves;
}

AnomalyScan checkpoint_anomaly_scan(std::span<const std::int64_t> steps,
                                    std::span<const double> statistic, double k) {
  if (steps.size() != statistic.size()) throw AnalysisError("steps/statistic length mismatch");
  if (statistic.size() < 5) throw AnalysisError("anomaly scan needs at least 5 points");
  AnomalyScan scan;
  scan.steps.assign(steps.begin(), steps.end());
  scan.statistic.assign(statistic.begin(), statistic.end());
  const auto t = robust_threshold(statistic, k);
  scan.median = t.median;
  scan.mad = t.mad;
  scan.threshold = t.value;
  scan.rule = t.rule;
  for (std::size_t i = 0; i < statistic.size(); ++i) {
    if (statistic[i] > scan.threshold) scan.flagged_steps.push_back(steps[i]);
  }
  return scan;
}

SeedScan seed_anomaly_scan(const KlMatrixResult& kl, double k) {
  const auto n = static_cast<std::size_t>(kl.value.rows());
  if (n < 3) throw AnalysisError("seed scan needs at least 3 models");
  SeedScan scan;
  scan.row_medians.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> off;
    off.reserve(n - 1);
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) off.push_back(kl.value(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
    }
    scan.row_medians[i] = stats::median(off);
  }
  const auto t = robust_threshold(scan.row_medians, k);
  scan.threshold = t.value;
  scan.rule = t.rule;
  for (std::size_t i = 0; i < n; ++i) {
    if (scan.row_medians[i] > scan.threshold) {
      scan.flagged.push_back(i);
      if (i < kl.model_ids.size()) scan.flagged_ids.push_back(kl.model_ids[i]);
    }
  }
  return scan;
}

std::vector<std::pair<std::int64_t, double>> consecutive_sq_distances(
    const LogLikelihoodMatrix& trajectory) {
  const auto rows = rows_by_step(trajectory);
  std::vector<std::pair<std::int64_t, double>> out;
  for (std::size_t r = 0; r + 1 < rows.size(); ++r) {
    const auto d = trajectory.values().row(static_cast<Eigen::Index>(rows[r + 1])) -
                   trajectory.values().row(static_cast<Eigen::Index>(rows[r]));
    out.emplace_back(*trajectory.models()[rows[r]].step, d.squaredNorm());
  }
  return out;
}

}  // namespace modelmap
