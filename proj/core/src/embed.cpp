#include "modelmap/embed.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "modelmap/error.hpp"

namespace modelmap {

Embedding pca(const Matrix& data, std::size_t n_components) {
  const auto k = static_cast<std::size_t>(data.rows());
  const auto n = static_cast<std::size_t>(data.cols());
  if (n_components == 0 || n_components > std::min(k, n)) {
    throw AnalysisError("PCA: n_components must lie in [1, min(K, N)]");
  }
  Embedding e;
  e.method = "pca";
  e.mean = data.colwise().mean();
  const Eigen::MatrixXd xc = data.rowwise() - e.mean;
  const Eigen::MatrixXd gram = xc * xc.transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
  if (eig.info() != Eigen::Success) throw AnalysisError("PCA: eigendecomposition failed");

  const Eigen::VectorXd& lambda = eig.eigenvalues();  // ascending
  const double total = std::max(lambda.sum(), 0.0);
  const double top = lambda(lambda.size() - 1);
  const double tol = std::max(top, 0.0) * 1e-10;

  std::vector<Eigen::Index> kept;
  for (Eigen::Index idx = lambda.size() - 1; idx >= 0 && kept.size() < n_components; --idx) {
    if (lambda(idx) > tol && lambda(idx) > 0.0) kept.push_back(idx);
  }
  if (kept.size() < n_components) {
    e.warnings.push_back("rank deficient: " + std::to_string(kept.size()) + " of " +
                         std::to_string(n_components) + " components returned");
  }
  if (kept.empty()) throw AnalysisError("PCA: data has zero variance");

  const auto m = static_cast<Eigen::Index>(kept.size());
  e.coords.resize(static_cast<Eigen::Index>(k), m);
  e.components.resize(static_cast<Eigen::Index>(n), m);
  for (Eigen::Index c = 0; c < m; ++c) {
    const double l = lambda(kept[static_cast<std::size_t>(c)]);
    Eigen::VectorXd u = eig.eigenvectors().col(kept[static_cast<std::size_t>(c)]);
    Eigen::VectorXd v = xc.transpose() * u / std::sqrt(l);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0.0) {
      v = -v;
      u = -u;
    }
    e.components.col(c) = v;
    e.coords.col(c) = u * std::sqrt(l);
    e.explained_variance_ratio.push_back(total > 0.0 ? l / total : 0.0);
  }
  return e;
}

Matrix pairwise_sq_distances(const Matrix& coords) {
  const auto k = coords.rows();
  Matrix d(k, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    d(i, i) = 0.0;
    for (Eigen::Index j = i + 1; j < k; ++j) {
      d(i, j) = d(j, i) = (coords.row(i) - coords.row(j)).squaredNorm();
    }
  }
  return d;
}

Matrix procrustes_align(const Matrix& coords, const Matrix& reference, bool allow_reflection) {
  if (coords.rows() != reference.rows() || coords.cols() != reference.cols()) {
    throw AnalysisError("Procrustes: shape mismatch");
  }
  const Eigen::MatrixXd a = coords.rowwise() - coords.colwise().mean();
  const Eigen::MatrixXd b = reference.rowwise() - reference.colwise().mean();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a.transpose() * b, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::MatrixXd u = svd.matrixU();
  const Eigen::MatrixXd v = svd.matrixV();
  if (!allow_reflection && (u * v.transpose()).determinant() < 0.0) {
    u.col(u.cols() - 1) *= -1.0;
  }
  return a * (u * v.transpose());
}

AcfResult autocorrelation(std::span<const double> series, std::optional<std::size_t> max_lag) {
  const std::size_t n = series.size();
  if (n < 8) throw AnalysisError("autocorrelation needs at least 8 points");
  const double m = std::accumulate(series.begin(), series.end(), 0.0) / static_cast<double>(n);
  std::vector<double> x(n);
  for (std::size_t t = 0; t < n; ++t) x[t] = series[t] - m;
  double c0 = 0.0;
  for (double v : x) c0 += v * v;
  if (c0 == 0.0) throw AnalysisError("autocorrelation of a constant series");

  const std::size_t lag_max = std::min(max_lag.value_or(n / 2), n - 1);
  AcfResult r;
  r.series_length = n;
  for (std::size_t lag = 0; lag <= lag_max; ++lag) {
    double s = 0.0;
    for (std::size_t t = 0; t + lag < n; ++t) s += x[t] * x[t + lag];
    r.lags.push_back(lag);
    r.values.push_back(lag == 0 ? 1.0 : s / c0);
  }
  for (std::size_t i = 0; i + 1 < r.values.size(); ++i) {
    const double a = r.values[i];
    const double b = r.values[i + 1];
    if ((a > 0.0 && b <= 0.0) || (a < 0.0 && b >= 0.0)) {
      r.zero_crossings.push_back(static_cast<double>(i) + a / (a - b));
    }
  }
  return r;
}

SpiralPeriod spiral_period(const AcfResult& acf) {
  SpiralPeriod out;
  if (acf.zero_crossings.size() < 3) {
    out.reason = "fewer than 3 zero crossings";
    return out;
  }
  const double lo = acf.zero_crossings[1];
  const double hi = acf.zero_crossings[2];
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < acf.lags.size(); ++i) {
    const auto lag = static_cast<double>(acf.lags[i]);
    if (lag <= lo || lag >= hi) continue;
    if (!best || acf.values[i] > acf.values[*best]) best = i;
  }
  if (!best) {
    out.reason = "no integer lag between the second and third zero crossings";
    return out;
  }
  out.peak_value = acf.values[*best];
  const double band = 3.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(acf.series_length, 1)));
  if (out.peak_value <= band) {
    out.reason = "peak within the white-noise band";
    return out;
  }
  out.lag = acf.lags[*best];
  return out;
}

ShiftSet shift_vectors(const CenteredMap& c,
                       const std::vector<std::pair<std::string, std::string>>& pairs) {
  ShiftSet set;
  for (const auto& [base, variant] : pairs) {
    const auto bi = c.find_model(base);
    const auto vi = c.find_model(variant);
    if (!bi) throw DataError("unknown model id '" + base + "'");
    if (!vi) throw DataError("unknown model id '" + variant + "'");
    ShiftVector s;
    s.base_id = base;
    s.variant_id = variant;
    s.group = c.models()[*bi].group.value_or("");
    s.diff = (c.coords().row(static_cast<Eigen::Index>(*vi)) -
              c.coords().row(static_cast<Eigen::Index>(*bi))).transpose();
    set.shifts.push_back(std::move(s));
  }
  return set;
}

double cosine_similarity(const Vector& a, const Vector& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return a.dot(b) / (na * nb);
}

namespace {

struct PairMean {
  double sum = 0.0;
  std::size_t count = 0;
  std::size_t skipped = 0;
};

PairMean mean_pairwise(const ShiftSet& s, const std::vector<std::size_t>& idx) {
  PairMean pm;
  for (std::size_t a = 0; a < idx.size(); ++a) {
    for (std::size_t b = a + 1; b < idx.size(); ++b) {
      const double cs = cosine_similarity(s.shifts[idx[a]].diff, s.shifts[idx[b]].diff);
      if (std::isnan(cs)) {
        ++pm.skipped;
        continue;
      }
      pm.sum += cs;
      ++pm.count;
    }
  }
  return pm;
}

}  // namespace

CosineReport cosine_similarity_report(const ShiftSet& s, std::size_t n_random,
                                      std::size_t sample_size, std::uint64_t seed) {
  CosineReport rep;
  rep.n_random = n_random;
  rep.sample_size = sample_size;
  std::map<std::string, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < s.shifts.size(); ++i) members[s.shifts[i].group].push_back(i);
  for (const auto& [group, idx] : members) {
    if (idx.size() < 2) {
      throw AnalysisError("group '" + group + "' has fewer than 2 shift vectors");
    }
    const auto pm = mean_pairwise(s, idx);
    rep.skipped_zero_norm += pm.skipped;
    rep.groups[group] = {pm.count ? pm.sum / static_cast<double>(pm.count)
                                  : std::numeric_limits<double>::quiet_NaN(),
                         pm.count};
  }
  if (n_random > 0) {
    if (sample_size < 2 || sample_size > s.shifts.size()) {
      throw AnalysisError("random baseline sample size must lie in [2, number of shifts]");
    }
    std::mt19937_64 rng(seed);
    std::vector<std::size_t> all(s.shifts.size());
    std::iota(all.begin(), all.end(), 0);
    double total = 0.0;
    std::size_t trials = 0;
    for (std::size_t t = 0; t < n_random; ++t) {
      // Partial Fisher-Yates: without replacement within a trial.
      for (std::size_t i = 0; i < sample_size; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, all.size() - 1);
        std::swap(all[i], all[pick(rng)]);
      }
      const std::vector<std::size_t> sample(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(sample_size));
      const auto pm = mean_pairwise(s, sample);
      if (pm.count == 0) continue;
      total += pm.sum / static_cast<double>(pm.count);
      ++trials;
    }
    rep.random_baseline = trials ? total / static_cast<double>(trials)
                                 : std::numeric_limits<double>::quiet_NaN();
  }
  return rep;
}

}  // namespace modelmap
