#pragma once
// Test-only reference computations. Nothing here calls into the library's
// centering or KL code paths.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "modelmap/matrix.hpp"

namespace oracle {

/// KL(i, j) in nats straight from raw log-likelihoods: q_i - q_j equals the
/// row-demeaned difference of l_i and l_j (column means cancel).
inline double kl_nats_from_raw(const modelmap::Matrix& l, Eigen::Index i, Eigen::Index j) {
  const auto n = l.cols();
  long double mean_diff = 0.0L;
  for (Eigen::Index s = 0; s < n; ++s) mean_diff += static_cast<long double>(l(i, s)) - l(j, s);
  mean_diff /= static_cast<long double>(n);
  long double acc = 0.0L;
  for (Eigen::Index s = 0; s < n; ++s) {
    const long double d = (static_cast<long double>(l(i, s)) - l(j, s)) - mean_diff;
    acc += d * d;
  }
  return static_cast<double>(acc / (2.0L * static_cast<long double>(n)));
}

/// Sorted-sample quantile with linear interpolation at position q (n - 1).
inline double brute_quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const double lo = std::floor(pos);
  const double hi = std::ceil(pos);
  const double a = v[static_cast<std::size_t>(lo)];
  const double b = v[static_cast<std::size_t>(hi)];
  return a + (pos - lo) * (b - a);
}

inline modelmap::Matrix random_matrix(Eigen::Index k, Eigen::Index n, std::uint64_t seed,
                                      double mean = -300.0, double sd = 40.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(mean, sd);
  modelmap::Matrix m(k, n);
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = 0; j < n; ++j) m(i, j) = normal(rng);
  return m;
}

/// Categorical world over `symbols` bytes: texts are i.i.d. symbol
/// sequences drawn from `truth`, one byte per symbol.
struct CategoricalWorld {
  std::vector<double> truth;
  std::vector<std::vector<double>> models;  // models[0] == truth
  modelmap::Matrix loglik;                  // K x N, nats
  std::size_t text_bytes = 0;

  /// Exact entropy of `truth` in bits per symbol (= bits/byte).
  double entropy_bits() const {
    double h = 0.0;
    for (double p : truth) h -= p * std::log2(p);
    return h;
  }
};

inline CategoricalWorld make_categorical_world(std::size_t num_texts, std::size_t text_bytes,
                                               std::size_t num_models, std::uint64_t seed) {
  CategoricalWorld w;
  w.text_bytes = text_bytes;
  w.truth = {0.30, 0.20, 0.15, 0.12, 0.10, 0.07, 0.04, 0.02};
  std::mt19937_64 rng(seed);
  w.models.push_back(w.truth);
  std::uniform_real_distribution<double> jitter(0.5, 1.5);
  for (std::size_t m = 1; m < num_models; ++m) {
    std::vector<double> p(w.truth.size());
    double z = 0.0;
    for (std::size_t s = 0; s < p.size(); ++s) z += (p[s] = w.truth[s] * jitter(rng));
    for (double& x : p) x /= z;
    w.models.push_back(std::move(p));
  }
  std::discrete_distribution<int> draw(w.truth.begin(), w.truth.end());
  w.loglik.resize(static_cast<Eigen::Index>(num_models), static_cast<Eigen::Index>(num_texts));
  for (std::size_t s = 0; s < num_texts; ++s) {
    std::vector<int> counts(w.truth.size(), 0);
    for (std::size_t b = 0; b < text_bytes; ++b) ++counts[static_cast<std::size_t>(draw(rng))];
    for (std::size_t m = 0; m < num_models; ++m) {
      double ll = 0.0;
      for (std::size_t c = 0; c < counts.size(); ++c) ll += counts[c] * std::log(w.models[m][c]);
      w.loglik(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(s)) = ll;
    }
  }
  return w;
}

/// Exact categorical KL in nats, for sanity comparisons only.
inline double categorical_kl(const std::vector<double>& p, const std::vector<double>& q) {
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) kl += p[i] * std::log(p[i] / q[i]);
  return kl;
}

}  // namespace oracle
