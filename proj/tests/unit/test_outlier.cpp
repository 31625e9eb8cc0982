#include <doctest.h>

#include <cmath>
#include <random>

#include "modelmap/error.hpp"
#include "modelmap/outlier.hpp"
#include "oracles.hpp"

using namespace modelmap;

namespace {

LogLikelihoodMatrix trajectory(const Matrix& values, const std::vector<std::int64_t>& steps) {
  auto models = synthetic_models(steps.size());
  for (std::size_t i = 0; i < steps.size(); ++i) models[i].step = steps[i];
  return LogLikelihoodMatrix(values, models, TextSetMeta::synthetic(static_cast<std::size_t>(values.cols())));
}

}  // namespace

TEST_CASE("text outlier score on a 1-model / 3-step fixture") {
  // Text 0 log-likelihoods -1, -5, -2 over three steps: |diffs| = 4, 3.
  Matrix v(3, 2);
  v << -1.0, -10.0,
       -5.0, -10.5,
       -2.0, -10.25;
  const std::vector<LogLikelihoodMatrix> trajs{trajectory(v, {2000, 3000, 4000})};
  const auto rep = text_outlier_scores(trajs, 0, 0.5);
  CHECK(rep.max_score[0] == 4.0);
  CHECK(rep.max_score[1] == 0.5);
  CHECK(rep.sd_score[0] == doctest::Approx(0.5));
  CHECK(rep.sd_score[1] == doctest::Approx(0.125));
  CHECK(rep.ranking == std::vector<std::size_t>{0, 1});
  CHECK(rep.pairs_used == 2);
  CHECK(rep.removal_count == 1);
  CHECK(rep.removal_set() == std::vector<std::size_t>{0});
}

TEST_CASE("warmup pairs are skipped") {
  Matrix v(3, 2);
  v << -1.0, -1.0,
       -100.0, -1.0,
       -100.5, -3.0;
  const std::vector<LogLikelihoodMatrix> trajs{trajectory(v, {0, 1000, 2000})};
  const auto rep = text_outlier_scores(trajs, 1000, 0.0);
  CHECK(rep.pairs_used == 1);
  CHECK(rep.max_score[0] == 0.5);
  CHECK(rep.max_score[1] == 2.0);
  CHECK_THROWS_AS(text_outlier_scores(trajs, 5000, 0.0), AnalysisError);
}

TEST_CASE("scores aggregate over several trajectories") {
  Matrix a(2, 2), b(2, 2);
  a << -1, -1, -2, -1;
  b << -1, -1, -1, -7;
  const std::vector<LogLikelihoodMatrix> trajs{trajectory(a, {0, 1}), trajectory(b, {0, 1})};
  const auto rep = text_outlier_scores(trajs, 0, 0.0);
  CHECK(rep.max_score == std::vector<double>{1.0, 6.0});
  CHECK(rep.ranking == std::vector<std::size_t>{1, 0});
}

TEST_CASE("removal sweep recomputes mean bytes and KL per count") {
  const Matrix v = oracle::random_matrix(4, 50, 12);
  const auto traj = trajectory(v, {1000, 2000, 3000, 4000});
  std::vector<std::size_t> ranking(50);
  for (std::size_t i = 0; i < 50; ++i) ranking[i] = 49 - i;
  const auto curves = removal_sweep(traj, ranking, {0, 10}, 2000);
  REQUIRE(curves.size() == 2);
  CHECK(curves[0].kl.size() == 2);
  CHECK(curves[0].kl[0].step_from == 2000);
  const auto reduced = remove_texts(traj, {49, 48, 47, 46, 45, 44, 43, 42, 41, 40});
  CHECK(reduced.num_texts() == 40);
  const auto direct = kl_pair(rescale_bits_per_byte(double_center(reduced)), 1, 2);
  CHECK(curves[1].kl[0].estimate.value == doctest::Approx(direct.value).epsilon(1e-12));
  CHECK(default_sweep_counts(350) == std::vector<std::size_t>{10, 100, 200, 300});
}

TEST_CASE("single planted spike is the only flagged checkpoint") {
  std::vector<std::int64_t> steps;
  std::vector<double> stat;
  for (int i = 0; i < 40; ++i) {
    steps.push_back(1000 * (i + 1));
    stat.push_back(1.0 + 0.05 * std::sin(0.7 * i));
  }
  stat[23] = 4.0;
  const auto scan = checkpoint_anomaly_scan(steps, stat);
  CHECK(scan.flagged_steps == std::vector<std::int64_t>{24000});
  CHECK(scan.rule == "median+k*mad");
  CHECK(scan.threshold > scan.median);
}

TEST_CASE("constant series uses the ratio rule") {
  std::vector<std::int64_t> steps{1, 2, 3, 4, 5, 6};
  std::vector<double> stat{2, 2, 2, 2, 2, 500};
  const auto scan = checkpoint_anomaly_scan(steps, stat);
  CHECK(scan.rule == "ratio_to_median");
  CHECK(scan.threshold == 200.0);
  CHECK(scan.flagged_steps == std::vector<std::int64_t>{6});
  CHECK_THROWS_AS(checkpoint_anomaly_scan(std::vector<std::int64_t>{1, 2},
                                          std::vector<double>{1, 2}),
                  AnalysisError);
}

TEST_CASE("planted 2-of-9 seed outliers are flagged exactly") {
  // Typical distances jittered around 0.04; rows 2 and 3 sit at 10x.
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> jitter(0.8, 1.2);
  KlMatrixResult kl;
  const Eigen::Index n = 9;
  kl.value = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    kl.model_ids.push_back("seed" + std::to_string(i + 1));
    kl.indices.push_back(static_cast<std::size_t>(i));
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const bool planted = (i == 2 || i == 3 || j == 2 || j == 3);
      const double v = 0.04 * jitter(rng) * (planted ? 10.0 : 1.0);
      kl.value(i, j) = kl.value(j, i) = v;
    }
  }
  const auto scan = seed_anomaly_scan(kl);
  CHECK(scan.rule == "median+k*mad");
  CHECK(scan.flagged == std::vector<std::size_t>{2, 3});
  CHECK(scan.flagged_ids == std::vector<std::string>{"seed3", "seed4"});
}

TEST_CASE("five identical models and one distant model") {
  KlMatrixResult kl;
  kl.value = Matrix::Zero(6, 6);
  for (Eigen::Index i = 0; i < 5; ++i) kl.value(i, 5) = kl.value(5, i) = 0.3;
  const auto scan = seed_anomaly_scan(kl);
  CHECK(scan.rule == "ratio_to_median");
  CHECK(scan.flagged == std::vector<std::size_t>{5});
  CHECK(scan.flagged_ids.empty());
}

TEST_CASE("consecutive squared distances follow step order") {
  Matrix v(3, 2);
  v << 0, 0, 3, 4, 1, 0;
  const auto d = consecutive_sq_distances(trajectory(v, {0, 20, 10}));
  REQUIRE(d.size() == 2);
  CHECK(d[0] == std::pair<std::int64_t, double>{0, 1.0});
  CHECK(d[1] == std::pair<std::int64_t, double>{10, 20.0});
}
