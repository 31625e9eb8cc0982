#include <doctest.h>

#include <cmath>

#include "modelmap/error.hpp"
#include "modelmap/stats.hpp"
#include "modelmap/synthetic.hpp"

using namespace modelmap;

TEST_CASE("sawtooth") {
  CHECK(sawtooth(0.0) == 0.0);
  CHECK(sawtooth(0.5) == 0.5);
  CHECK(sawtooth(0.25) == 0.25);
  CHECK(sawtooth(0.75) == 0.25);
  CHECK(sawtooth(-1.3) == doctest::Approx(0.3));
  CHECK(sawtooth(7.9) == doctest::Approx(0.1));
}

TEST_CASE("fBm covariance and generator") {
  CHECK(FbmGenerator::covariance(0.5, 3, 5) == doctest::Approx(3.0));
  CHECK(FbmGenerator::covariance(0.25, 4, 4) == doctest::Approx(2.0));

  const FbmGenerator gen(0.3, 256);
  const auto a = gen.sample(4, 11);
  const auto b = gen.sample(4, 11);
  const auto c = gen.sample(4, 12);
  CHECK(a.points == b.points);
  CHECK(a.points != c.points);
  CHECK(a.steps.front() == 1);
  CHECK(a.steps.back() == 256);
  CHECK(a.points.rows() == 256);
  CHECK(a.points.cols() == 4);
  CHECK_THROWS_AS(FbmGenerator(0.0, 10), ConfigError);
  CHECK_THROWS_AS(FbmGenerator(1.0, 10), ConfigError);
}

TEST_CASE("fBm variance grows as t^(2H)") {
  // Empirical E[B_t^2] over many coordinates at t = 64 and t = 256.
  const double h = 0.35;
  const FbmGenerator gen(h, 256);
  const auto traj = gen.sample(4000, 5);
  const double v64 = traj.points.row(63).squaredNorm() / 4000.0;
  const double v256 = traj.points.row(255).squaredNorm() / 4000.0;
  CHECK(v64 == doctest::Approx(std::pow(64.0, 2 * h)).epsilon(0.08));
  CHECK(v256 == doctest::Approx(std::pow(256.0, 2 * h)).epsilon(0.08));
}

TEST_CASE("fBm exponent recovery, small ensemble") {
  for (double h : {0.25, 0.5}) {
    const FbmGenerator gen(h, 1024);
    std::vector<double> cs;
    for (std::uint64_t p = 0; p < 10; ++p) {
      const auto traj = gen.sample(16, 100 + p);
      cs.push_back(fit_trajectory(traj, 1, FitWindow::all()).c);
    }
    CHECK(std::abs(stats::mean(cs) - 2 * h) < 0.1);
  }
}

TEST_CASE("Takagi map hand example") {
  TakagiSpec spec;
  spec.alpha = 0.5;
  spec.lambda = 2.0;
  spec.k_max = 1;
  spec.output_dim = 2;
  spec.input_dim = 2;
  Matrix a = Matrix::Zero(1, 2), b = Matrix::Zero(1, 2);
  a(0, 0) = 1.0;
  b(0, 0) = 1.0;
  const TakagiMap f(spec, a, b);
  Vector w(2);
  w << 0.2, 0.9;
  const auto out = f(w);
  // 2^{-1/2} * S(2 * 0.2) = 2^{-1/2} * 0.4
  CHECK(out(0) == doctest::Approx(std::pow(2.0, -0.5) * 0.4));
  CHECK(out(1) == 0.0);
  CHECK_THROWS_AS(TakagiMap(spec, Matrix::Zero(2, 2), b), ConfigError);
}

TEST_CASE("Takagi map bounds and determinism") {
  TakagiSpec spec;
  spec.seed = 3;
  const TakagiMap f(spec);
  const TakagiMap g(spec);
  CHECK(f.a() == g.a());
  CHECK(f.b() == g.b());
  CHECK((f.a().rowwise().norm().array() - 1.0).abs().maxCoeff() < 1e-12);
  Vector w = Vector::LinSpaced(16, -3.0, 5.0);
  const auto out = f(w);
  CHECK(out.cwiseAbs().maxCoeff() <= f.output_bound() + 1e-12);
  CHECK(f.tail_bound() >= 0.0);
  CHECK(takagi_map(spec, w) == out);
}

TEST_CASE("Takagi map is Holder-alpha on small scales") {
  // |f(w + h e) - f(w)| / |h|^alpha stays bounded as h shrinks.
  TakagiSpec spec;
  spec.seed = 1;
  spec.alpha = 0.3;
  const TakagiMap f(spec);
  Vector w = Vector::Constant(16, 0.123);
  Vector e = Vector::Zero(16);
  e(0) = 1.0;
  double worst = 0.0;
  for (int p = 4; p <= 30; p += 2) {
    const double h = std::ldexp(1.0, -p);
    const double ratio = (f(w + h * e) - f(w)).norm() / std::pow(h, spec.alpha);
    worst = std::max(worst, ratio);
  }
  CHECK(worst < 50.0);
}

TEST_CASE("identity folding gives alpha exactly one") {
  FoldingSpec spec;
  spec.kind = FoldingMap::identity;
  spec.fbm.n_steps = 256;
  spec.fbm.dim = 4;
  spec.n_paths = 3;
  const auto res = folding_experiment(spec);
  for (const auto& p : res.paths) CHECK(p.alpha_hat == 1.0);
  CHECK(res.alpha_hat == 1.0);
}

TEST_CASE("default_k_max") {
  const auto k = default_k_max(0.3, 2.0);
  const double q = std::pow(2.0, -0.3);
  const double total = q / (1 - q);
  const double tail = std::pow(q, static_cast<double>(k + 1)) / (1 - q);
  CHECK(tail <= 1e-6 * total);
  const double tail_prev = std::pow(q, static_cast<double>(k)) / (1 - q);
  CHECK(tail_prev > 1e-6 * total);
}
