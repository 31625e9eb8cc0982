#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "modelmap/matrix.hpp"
#include "modelmap/scaling.hpp"

namespace modelmap {

struct FbmSpec {
  double hurst = 0.5;
  std::size_t n_steps = 1024;
  std::size_t dim = 1;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Exact-covariance fractional Brownian motion on t = 1..n, sampled from
/// the Cholesky factor of 0.5 (s^2H + t^2H - |s-t|^2H). The factor is
/// computed once, so one generator can serve a whole ensemble.
class FbmGenerator {
 public:
  FbmGenerator(double hurst, std::size_t n_steps);

  /// Independent coordinates, one column each. Deterministic per seed.
  Trajectory sample(std::size_t dim, std::uint64_t seed, double scale = 1.0) const;

  double hurst() const { return hurst_; }
  std::size_t n_steps() const { return n_steps_; }
  /// Diagonal jitter that was needed for the factorization (0 if none).
  double jitter() const { return jitter_; }

  static double covariance(double hurst, double s, double t);

 private:
  double hurst_;
  std::size_t n_steps_;
  double jitter_ = 0.0;
  Matrix lower_;
};

Trajectory fbm_generate(const FbmSpec& spec);

/// Distance to the nearest integer, in [0, 0.5].
double sawtooth(double x);

struct TakagiSpec {
  double alpha = 0.3;
  double lambda = 2.0;
  std::size_t k_max = 40;
  std::size_t output_dim = 64;
  std::size_t input_dim = 16;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Smallest k_max with 0.5 * sum_{k > k_max} lambda^{-k alpha} below
/// rel_tol times the output scale 0.5 * sum_{k >= 1} lambda^{-k alpha}.
std::size_t default_k_max(double alpha, double lambda, double rel_tol = 1e-6);

/// f(W) = sum_{k=1}^{k_max} a_k lambda^{-k alpha} S(lambda^k b_k . W), with
/// a_k, b_k uniform on unit spheres drawn from the seed.
class TakagiMap {
 public:
  explicit TakagiMap(const TakagiSpec& spec);
  /// Explicit directions, k_max x output_dim and k_max x input_dim. Rows are
  /// used as given (not normalized); spec.seed is ignored.
  TakagiMap(const TakagiSpec& spec, Matrix a, Matrix b);

  Vector operator()(const Eigen::Ref<const Vector>& w) const;
  Trajectory apply(const Trajectory& input) const;

  const TakagiSpec& spec() const { return spec_; }
  /// sum_{k > k_max} lambda^{-k alpha}; the truncation error is at most half of it.
  double tail_bound() const;
  /// sum_{k=1}^{k_max} lambda^{-k alpha} * 0.5, an upper bound on |f|.
  double output_bound() const;

  const Matrix& a() const { return a_; }
  const Matrix& b() const { return b_; }

 private:
  void init_scales();

  TakagiSpec spec_;
  Matrix a_;  // k_max x output_dim
  Matrix b_;  // k_max x input_dim
  std::vector<double> amplitude_;
  std::vector<double> frequency_;
};

Vector takagi_map(const TakagiSpec& spec, const Vector& w);

enum class FoldingMap { identity, takagi };

struct FoldingSpec {
  FbmSpec fbm{0.5, 2048, 16, 0};
  TakagiSpec map{};
  FoldingMap kind = FoldingMap::takagi;
  /// Multiplies the weight-space path before mapping. Sets where the
  /// displacement range sits relative to the sawtooth scales lambda^-k.
  double input_scale = 1.0 / 1048576.0;  // 2^-20
  std::size_t n_paths = 20;
  unsigned threads = 1;
};

struct FoldingPath {
  double c_w = 0.0;
  double c_q = 0.0;
  double alpha_hat = 0.0;
  double r_squared_w = 0.0;
  double r_squared_q = 0.0;
};

struct FoldingResult {
  std::vector<FoldingPath> paths;
  double c_w = 0.0;        // ensemble means
  double c_q = 0.0;
  double alpha_hat = 0.0;  // mean of per-path c_q / c_w
  double tail_bound = 0.0;
  double fbm_jitter = 0.0;
};

/// Each path: Brownian-like W trajectory, mapped pointwise, both exponents
/// fitted from the first step over every later step.
FoldingResult folding_experiment(const FoldingSpec& spec);

}  // namespace modelmap
