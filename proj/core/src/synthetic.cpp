#include "modelmap/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "modelmap/error.hpp"
#include "modelmap/parallel.hpp"

namespace modelmap {

void FbmSpec::validate() const {
  if (!(hurst > 0.0 && hurst < 1.0)) throw ConfigError("Hurst exponent must lie in (0, 1)");
  if (n_steps < 2) throw ConfigError("fBm needs at least 2 steps");
  if (dim < 1) throw ConfigError("fBm dimension must be positive");
}

double FbmGenerator::covariance(double hurst, double s, double t) {
  const double h2 = 2.0 * hurst;
  return 0.5 * (std::pow(s, h2) + std::pow(t, h2) - std::pow(std::abs(s - t), h2));
}

FbmGenerator::FbmGenerator(double hurst, std::size_t n_steps) : hurst_(hurst), n_steps_(n_steps) {
  FbmSpec{hurst, n_steps, 1, 0}.validate();
  const auto n = static_cast<Eigen::Index>(n_steps);
  Eigen::MatrixXd cov(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      cov(i, j) = cov(j, i) =
          covariance(hurst, static_cast<double>(i + 1), static_cast<double>(j + 1));
    }
  }
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) {
    jitter_ = 1e-12 * cov.diagonal().maxCoeff();
    cov.diagonal().array() += jitter_;
    llt.compute(cov);
    if (llt.info() != Eigen::Success) {
      throw AnalysisError("fBm covariance is not positive definite even with jitter");
    }
  }
  lower_ = llt.matrixL();
}

Trajectory FbmGenerator::sample(std::size_t dim, std::uint64_t seed, double scale) const {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto n = static_cast<Eigen::Index>(n_steps_);
  Eigen::MatrixXd z(n, static_cast<Eigen::Index>(dim));
  for (Eigen::Index c = 0; c < z.cols(); ++c) {
    for (Eigen::Index r = 0; r < n; ++r) z(r, c) = normal(rng);
  }
  Trajectory t;
  t.space = Space::weights;
  Eigen::MatrixXd path = lower_.triangularView<Eigen::Lower>() * z;
  t.points = scale * path;
  t.steps.resize(n_steps_);
  for (std::size_t i = 0; i < n_steps_; ++i) t.steps[i] = static_cast<std::int64_t>(i + 1);
  return t;
}

Trajectory fbm_generate(const FbmSpec& spec) {
  spec.validate();
  return FbmGenerator(spec.hurst, spec.n_steps).sample(spec.dim, spec.seed);
}

double sawtooth(double x) { return std::abs(x - std::nearbyint(x)); }

void TakagiSpec::validate() const {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("Takagi alpha must lie in (0, 1]");
  if (!(lambda > 1.0)) throw ConfigError("Takagi lambda must exceed 1");
  if (k_max < 1) throw ConfigError("Takagi k_max must be positive");
  if (output_dim < 1 || input_dim < 1) throw ConfigError("Takagi dimensions must be positive");
}

std::size_t default_k_max(double alpha, double lambda, double rel_tol) {
  const double r = std::pow(lambda, -alpha);
  // sum_{k > K} r^k / sum_{k >= 1} r^k = r^K
  const double k = std::log(rel_tol) / std::log(r);
  return static_cast<std::size_t>(std::max(1.0, std::ceil(k)));
}

namespace {

void draw_unit_rows(Matrix& m, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    double norm = 0.0;
    do {
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = normal(rng);
      norm = m.row(r).norm();
    } while (norm == 0.0);
    m.row(r) /= norm;
  }
}

}  // namespace

TakagiMap::TakagiMap(const TakagiSpec& spec) : spec_(spec) {
  spec_.validate();
  const auto k = static_cast<Eigen::Index>(spec_.k_max);
  a_.resize(k, static_cast<Eigen::Index>(spec_.output_dim));
  b_.resize(k, static_cast<Eigen::Index>(spec_.input_dim));
  std::mt19937_64 rng(spec_.seed);
  draw_unit_rows(a_, rng);
  draw_unit_rows(b_, rng);
  init_scales();
}

TakagiMap::TakagiMap(const TakagiSpec& spec, Matrix a, Matrix b)
    : spec_(spec), a_(std::move(a)), b_(std::move(b)) {
  spec_.validate();
  const auto k = static_cast<Eigen::Index>(spec_.k_max);
  if (a_.rows() != k || a_.cols() != static_cast<Eigen::Index>(spec_.output_dim) ||
      b_.rows() != k || b_.cols() != static_cast<Eigen::Index>(spec_.input_dim)) {
    throw ConfigError("Takagi directions do not match k_max and dimensions");
  }
  init_scales();
}

void TakagiMap::init_scales() {
  for (std::size_t i = 1; i <= spec_.k_max; ++i) {
    const auto kk = static_cast<double>(i);
    amplitude_.push_back(std::pow(spec_.lambda, -kk * spec_.alpha));
    frequency_.push_back(std::pow(spec_.lambda, kk));
  }
}

Vector TakagiMap::operator()(const Eigen::Ref<const Vector>& w) const {
  if (static_cast<std::size_t>(w.size()) != spec_.input_dim) {
    throw AnalysisError("Takagi map input has dimension " + std::to_string(w.size()) +
                        ", expected " + std::to_string(spec_.input_dim));
  }
  Vector out = Vector::Zero(static_cast<Eigen::Index>(spec_.output_dim));
  for (std::size_t k = 0; k < spec_.k_max; ++k) {
    const auto row = static_cast<Eigen::Index>(k);
    const double proj = b_.row(row).dot(w);
    out += (amplitude_[k] * sawtooth(frequency_[k] * proj)) * a_.row(row).transpose();
  }
  return out;
}

Trajectory TakagiMap::apply(const Trajectory& input) const {
  Trajectory out;
  out.steps = input.steps;
  out.space = Space::loglik_map;
  out.points.resize(input.points.rows(), static_cast<Eigen::Index>(spec_.output_dim));
  for (Eigen::Index r = 0; r < input.points.rows(); ++r) {
    out.points.row(r) = (*this)(input.points.row(r).transpose()).transpose();
  }
  return out;
}

double TakagiMap::tail_bound() const {
  const double r = std::pow(spec_.lambda, -spec_.alpha);
  return std::pow(r, static_cast<double>(spec_.k_max + 1)) / (1.0 - r);
}

double TakagiMap::output_bound() const {
  double s = 0.0;
  for (double a : amplitude_) s += a;
  return 0.5 * s;
}

Vector takagi_map(const TakagiSpec& spec, const Vector& w) { return TakagiMap(spec)(w); }

FoldingResult folding_experiment(const FoldingSpec& spec) {
  spec.fbm.validate();
  if (spec.n_paths < 1) throw ConfigError("folding experiment needs at least one path");
  const FbmGenerator gen(spec.fbm.hurst, spec.fbm.n_steps);
  std::optional<TakagiMap> map;
  if (spec.kind == FoldingMap::takagi) {
    TakagiSpec ms = spec.map;
    ms.input_dim = spec.fbm.dim;
    map.emplace(ms);
  }

  FoldingResult result;
  result.fbm_jitter = gen.jitter();
  result.tail_bound = map ? map->tail_bound() : 0.0;
  result.paths.resize(spec.n_paths);

  auto run_path = [&](std::size_t p) {
    // Distinct, reproducible stream per path.
    const std::uint64_t seed = spec.fbm.seed * 1000003ull + p;
    const Trajectory w = gen.sample(spec.fbm.dim, seed, spec.input_scale);
    const Trajectory q = map ? map->apply(w) : w;
    const auto fw = fit_trajectory(w, w.steps.front(), FitWindow::all());
    const auto fq = fit_trajectory(q, q.steps.front(), FitWindow::all());
    result.paths[p] = {fw.c, fq.c, holder_exponent(fw, fq), fw.r_squared, fq.r_squared};
  };

  parallel_for(spec.n_paths, spec.threads, run_path);

  for (const auto& p : result.paths) {
    result.c_w += p.c_w;
    result.c_q += p.c_q;
    result.alpha_hat += p.alpha_hat;
  }
  const auto n = static_cast<double>(spec.n_paths);
  result.c_w /= n;
  result.c_q /= n;
  result.alpha_hat /= n;
  return result;
}

}  // namespace modelmap
