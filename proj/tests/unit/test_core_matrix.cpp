#include <doctest.h>

#include <cmath>
#include <numbers>

#include "modelmap/error.hpp"
#include "modelmap/matrix.hpp"
#include "oracles.hpp"

using namespace modelmap;

namespace {

LogLikelihoodMatrix wrap(Matrix values) {
  const auto k = static_cast<std::size_t>(values.rows());
  const auto n = static_cast<std::size_t>(values.cols());
  return LogLikelihoodMatrix(std::move(values), synthetic_models(k), TextSetMeta::synthetic(n));
}

double max_row_col_sum(const Matrix& q) {
  return std::max(q.rowwise().sum().cwiseAbs().maxCoeff(), q.colwise().sum().cwiseAbs().maxCoeff());
}

}  // namespace

TEST_CASE("text metadata keeps the arithmetic mean of byte lengths") {
  const TextSetMeta t({"a", "b", "c"}, {100, 200, 301});
  CHECK(t.mean_bytes() == doctest::Approx(601.0 / 3.0).epsilon(1e-12));
  CHECK_THROWS_AS(TextSetMeta({"a", "a"}, {1, 2}), DataError);
  CHECK_THROWS_AS(TextSetMeta({"a", "b"}, {1, 0}), DataError);
  CHECK_THROWS_AS(TextSetMeta({"a"}, {1, 2}), DataError);
}

TEST_CASE("matrix construction rejects bad shapes, non-finite entries and duplicate ids") {
  Matrix v(2, 2);
  v << -1, -2, -3, -4;
  CHECK_NOTHROW(wrap(v));
  CHECK_THROWS_AS(LogLikelihoodMatrix(v, synthetic_models(3), TextSetMeta::synthetic(2)), DataError);
  auto dup = synthetic_models(2);
  dup[1].id = dup[0].id;
  CHECK_THROWS_AS(LogLikelihoodMatrix(v, dup, TextSetMeta::synthetic(2)), DataError);
  v(1, 0) = std::nan("");
  CHECK_THROWS_WITH_AS(wrap(v), doctest::Contains("(1,0)"), DataError);
}

TEST_CASE("clip_bottom_quantile") {
  SUBCASE("q = 0 is the identity") {
    const auto m = wrap(oracle::random_matrix(3, 7, 1));
    CHECK(clip_bottom_quantile(m, 0.0).values() == m.values());
  }
  SUBCASE("entries 1..100 at q = 0.02 are raised to 2.98") {
    Matrix v(10, 10);
    for (int i = 0; i < 100; ++i) v(i / 10, i % 10) = i + 1;
    const double expected =
        oracle::brute_quantile(std::vector<double>(v.data(), v.data() + v.size()), 0.02);
    CHECK(expected == doctest::Approx(2.98).epsilon(1e-14));
    const auto c = clip_bottom_quantile(wrap(v), 0.02);
    CHECK(c.values()(0, 0) == doctest::Approx(2.98).epsilon(1e-14));
    CHECK(c.values()(0, 1) == doctest::Approx(2.98).epsilon(1e-14));
    CHECK(c.values()(0, 2) == 3.0);
    CHECK(c.values()(9, 9) == 100.0);
  }
  SUBCASE("monotone, and entries above the quantile are untouched") {
    const auto m = wrap(oracle::random_matrix(6, 40, 2));
    const auto once = clip_bottom_quantile(m, 0.1);
    const double qv = oracle::brute_quantile(
        std::vector<double>(m.values().data(), m.values().data() + m.values().size()), 0.1);
    CHECK((once.values().array() >= m.values().array()).all());
    CHECK(once.values().minCoeff() == doctest::Approx(qv).epsilon(1e-14));
    for (Eigen::Index a = 0; a < m.values().size(); ++a) {
      if (m.values().data()[a] >= qv) CHECK(once.values().data()[a] == m.values().data()[a]);
    }
  }
  CHECK_THROWS_AS(clip_bottom_quantile(wrap(oracle::random_matrix(2, 2, 3)), 1.0), AnalysisError);
}

TEST_CASE("double_center") {
  SUBCASE("constant matrix centers to zero") {
    const auto c = double_center(wrap(Matrix::Constant(3, 4, -7.5)));
    CHECK(c.coords().cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("2x2 worked example") {
    Matrix v(2, 2);
    v << 1, 2, 3, 5;
    const auto c = double_center(wrap(v));
    CHECK(c.coords()(0, 0) == doctest::Approx(0.25));
    CHECK(c.coords()(0, 1) == doctest::Approx(-0.25));
    CHECK(c.coords()(1, 0) == doctest::Approx(-0.25));
    CHECK(c.coords()(1, 1) == doctest::Approx(0.25));
    CHECK(c.scale() == Scale::raw_nats);
  }
  SUBCASE("row and column sums vanish; projection is idempotent") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto c = double_center(wrap(oracle::random_matrix(8, 32, seed)));
      const double tol = 1e-6 * 32 * c.coords().cwiseAbs().maxCoeff();
      CHECK(max_row_col_sum(c.coords()) <= tol);
      const auto cc = double_center(c);
      CHECK((cc.coords() - c.coords()).cwiseAbs().maxCoeff() < 1e-10);
    }
  }
  SUBCASE("row- and column-constant shifts leave Q unchanged") {
    Matrix v = oracle::random_matrix(8, 32, 11);
    const auto base = double_center(wrap(v));
    Matrix shifted = v;
    std::mt19937_64 rng(5);
    std::normal_distribution<double> nd(0.0, 100.0);
    for (Eigen::Index i = 0; i < 8; ++i) shifted.row(i).array() += nd(rng);
    for (Eigen::Index j = 0; j < 32; ++j) shifted.col(j).array() += nd(rng);
    CHECK((double_center(wrap(shifted)).coords() - base.coords()).cwiseAbs().maxCoeff() < 1e-10);
  }
  CHECK_THROWS_AS(double_center(wrap(Matrix::Zero(1, 5))), AnalysisError);
  CHECK_THROWS_AS(double_center(wrap(Matrix::Zero(5, 1))), AnalysisError);
}

TEST_CASE("rescale_bits_per_byte") {
  SUBCASE("N = 1, mean bytes 1/(2 ln 2) gives divisor 1") {
    CHECK(bits_per_byte_divisor(1, 1.0 / (2.0 * std::numbers::ln2)) == doctest::Approx(1.0));
  }
  SUBCASE("rescaled squared distance equals raw distance / (2 N Bbar ln 2)") {
    std::vector<std::int64_t> lengths;
    std::vector<std::string> ids;
    for (int s = 0; s < 16; ++s) {
      lengths.push_back(900 + 13 * s);
      ids.push_back("x" + std::to_string(s));
    }
    const TextSetMeta texts(ids, lengths);
    const LogLikelihoodMatrix m(oracle::random_matrix(4, 16, 9), synthetic_models(4), texts);
    const auto raw = double_center(m);
    const auto bpb = rescale_bits_per_byte(raw);
    CHECK(bpb.scale() == Scale::bits_per_byte);
    const double factor = 1.0 / (2.0 * 16 * texts.mean_bytes() * std::numbers::ln2);
    for (Eigen::Index i = 0; i < 4; ++i) {
      for (Eigen::Index j = 0; j < 4; ++j) {
        const double d_raw = (raw.coords().row(i) - raw.coords().row(j)).squaredNorm();
        const double d_bpb = (bpb.coords().row(i) - bpb.coords().row(j)).squaredNorm();
        CHECK(d_bpb == doctest::Approx(factor * d_raw).epsilon(1e-12));
      }
    }
    CHECK_THROWS_AS(rescale_bits_per_byte(bpb), AnalysisError);
  }
}

TEST_CASE("exp_coordinates") {
  const CenteredMap zeros(Matrix::Zero(2, 3), Scale::raw_nats, synthetic_models(2),
                          TextSetMeta::synthetic(3));
  const auto e = exp_coordinates(zeros);
  CHECK((e.values.array() == 1.0).all());
  CHECK(e.capped_entries == 0);

  const auto c = double_center(wrap(oracle::random_matrix(3, 10, 4, 0.0, 1.0)));
  const auto ec = exp_coordinates(c);
  for (Eigen::Index a = 0; a < c.coords().size(); ++a) {
    for (Eigen::Index b = 0; b < c.coords().size(); ++b) {
      if (c.coords().data()[a] < c.coords().data()[b]) {
        CHECK(ec.values.data()[a] < ec.values.data()[b]);
      }
    }
  }

  Matrix big(2, 2);
  big << 100, -100, -100, 100;
  const auto capped = exp_coordinates(
      CenteredMap(big, Scale::raw_nats, synthetic_models(2), TextSetMeta::synthetic(2)));
  CHECK(capped.capped_entries == 2);
  CHECK(capped.values(0, 0) == doctest::Approx(std::exp(30.0)));

  CHECK_THROWS_AS(exp_coordinates(rescale_bits_per_byte(c)), AnalysisError);
  CHECK_NOTHROW(exp_coordinates(rescale_bits_per_byte(c), {30.0, true}));
}

TEST_CASE("select_rows") {
  auto models = synthetic_models(6);
  for (std::size_t i = 0; i < 6; ++i) {
    models[i].group = i < 3 ? "pythia-410m" : "pythia-1b";
    models[i].tags["seed"] = std::to_string(i + 1);
  }
  const LogLikelihoodMatrix m(oracle::random_matrix(6, 12, 21), models, TextSetMeta::synthetic(12));

  const auto by_group = select_rows(m, [](const ModelMeta& mm) { return mm.group == "pythia-410m"; });
  CHECK(by_group.num_models() == 3);
  CHECK(by_group.num_texts() == 12);

  const auto no_34 = select_rows(m, [](const ModelMeta& mm) {
    const auto s = mm.tags.at("seed");
    return s != "3" && s != "4";
  });
  CHECK(no_34.num_models() == 4);
  CHECK_FALSE(no_34.find_model("m2"));

  CHECK_THROWS_AS(select_rows(m, [](const ModelMeta&) { return false; }), DataError);

  SUBCASE("map subsets inherit centering unless recentered; recentering equals centering L") {
    const auto full = double_center(m);
    auto pred = [](const ModelMeta& mm) { return mm.group == "pythia-1b"; };
    const auto inherited = select_rows(full, pred);
    CHECK(inherited.centering_inherited());
    const auto recentered = select_rows(full, pred, true);
    CHECK_FALSE(recentered.centering_inherited());
    const auto direct = double_center(select_rows(m, pred));
    CHECK((recentered.coords() - direct.coords()).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("column removal recomputes mean bytes") {
  const TextSetMeta texts({"a", "b", "c"}, {100, 200, 600});
  const LogLikelihoodMatrix m(oracle::random_matrix(2, 3, 1), synthetic_models(2), texts);
  const auto r = remove_columns(m, {2});
  CHECK(r.num_texts() == 2);
  CHECK(r.texts().mean_bytes() == doctest::Approx(150.0));
  CHECK(r.texts().ids() == std::vector<std::string>{"a", "b"});
  CHECK_THROWS_AS(remove_columns(m, {0, 1, 2}), DataError);
  CHECK_THROWS_AS(remove_columns(m, {3}), DataError);
}
