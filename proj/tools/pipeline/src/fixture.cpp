#include "modelmap_cli/fixture.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "modelmap/error.hpp"
#include "modelmap/synthetic.hpp"

namespace modelmap::cli {

namespace {

bool contains(const std::vector<std::string>& v, const std::string& s) {
  return std::find(v.begin(), v.end(), s) != v.end();
}

}  // namespace

Fixture make_fixture(const FixtureSpec& spec) {
  if (spec.groups.empty()) throw ConfigError("fixture needs at least one group");
  if (spec.checkpoints < 4) throw ConfigError("fixture needs at least 4 checkpoints");
  if (spec.n_texts < 8) throw ConfigError("fixture needs at least 8 texts");
  if (spec.outlier_texts >= spec.n_texts) throw ConfigError("too many fixture outlier texts");

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<std::int64_t> bytes_dist(600, 1400);
  std::uniform_real_distribution<double> entropy_dist(0.7, 1.1);

  const auto n = static_cast<Eigen::Index>(spec.n_texts);
  std::vector<std::string> text_ids;
  std::vector<std::int64_t> byte_lengths;
  Eigen::RowVectorXd base(n);
  for (Eigen::Index s = 0; s < n; ++s) {
    text_ids.push_back("text-" + std::to_string(s));
    byte_lengths.push_back(bytes_dist(rng));
    base(s) = -static_cast<double>(byte_lengths.back()) * entropy_dist(rng) * std::numbers::ln2;
  }

  TakagiSpec map_spec;
  map_spec.alpha = spec.alpha;
  map_spec.lambda = 2.0;
  map_spec.k_max = std::min<std::size_t>(default_k_max(spec.alpha, 2.0), 60);
  map_spec.output_dim = spec.n_texts;
  map_spec.input_dim = spec.weight_dim;
  map_spec.seed = spec.seed + 1;
  const TakagiMap f(map_spec);
  const FbmGenerator brownian(0.5, spec.checkpoints);

  std::vector<std::size_t> order(spec.n_texts);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::size_t> outliers(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(spec.outlier_texts));
  std::sort(outliers.begin(), outliers.end());

  Eigen::RowVectorXd twin_shift(n);
  for (Eigen::Index s = 0; s < n; ++s) twin_shift(s) = 0.5 * spec.group_separation * normal(rng);

  const auto d = static_cast<Eigen::Index>(spec.weight_dim);
  std::vector<ModelMeta> models, weight_models;
  std::vector<Eigen::RowVectorXd> rows, weight_rows;
  for (std::size_t g = 0; g < spec.groups.size(); ++g) {
    const auto& name = spec.groups[g];
    const double offset_sd =
        spec.group_separation * (contains(spec.anomalous_groups, name) ? 5.0 : 1.0);
    Eigen::RowVectorXd offset(n);
    for (Eigen::Index s = 0; s < n; ++s) offset(s) = offset_sd * normal(rng);
    Eigen::RowVectorXd origin(d);
    for (Eigen::Index k = 0; k < d; ++k) origin(k) = 10.0 * normal(rng);
    const auto path = brownian.sample(spec.weight_dim, spec.seed * 7919 + g + 11);

    Eigen::RowVectorXd group_shift = twin_shift;
    for (Eigen::Index s = 0; s < n; ++s) group_shift(s) += 0.5 * spec.group_separation * normal(rng);

    Eigen::RowVectorXd spike(d);
    for (Eigen::Index k = 0; k < d; ++k) spike(k) = 10.0 * normal(rng);

    for (std::size_t t = 0; t < spec.checkpoints; ++t) {
      const std::int64_t step = spec.start_step + static_cast<std::int64_t>(t) * spec.step_stride;
      Eigen::RowVectorXd w = origin + path.points.row(static_cast<Eigen::Index>(t));
      if (spec.weight_spike_step && *spec.weight_spike_step == step) w += spike;
      const Vector q = f((spec.input_scale * w).transpose());
      Eigen::RowVectorXd l = base + offset + spec.amplitude * q.transpose();
      const double flip = (t % 2 == 0) ? 1.0 : -1.0;
      for (std::size_t s : outliers) l(static_cast<Eigen::Index>(s)) += 20.0 * spec.amplitude * flip;

      ModelMeta m;
      m.id = name + "@step" + std::to_string(step);
      m.group = name;
      m.step = step;
      m.tags["quant"] = "fp16";
      m.tags["run"] = name;
      models.push_back(m);
      rows.push_back(l);
      weight_models.push_back(m);
      weight_rows.push_back(w);

      if (t + spec.quantized_twins >= spec.checkpoints) {
        ModelMeta twin = m;
        twin.id = m.id + "-8bit";
        twin.group = name + "/8bit";
        twin.tags["quant"] = "8bit";
        Eigen::RowVectorXd lt = l + group_shift;
        for (Eigen::Index s = 0; s < n; ++s) lt(s) += 0.1 * spec.group_separation * normal(rng);
        models.push_back(std::move(twin));
        rows.push_back(std::move(lt));
      }
    }
  }

  auto stack = [](const std::vector<Eigen::RowVectorXd>& r) {
    Matrix out(static_cast<Eigen::Index>(r.size()), r.front().size());
    for (std::size_t i = 0; i < r.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = r[i];
    return out;
  };
  std::vector<std::string> weight_ids;
  for (Eigen::Index k = 0; k < d; ++k) weight_ids.push_back("w" + std::to_string(k));

  return Fixture{
      LogLikelihoodMatrix(stack(rows), std::move(models), TextSetMeta(text_ids, byte_lengths)),
      LogLikelihoodMatrix(stack(weight_rows), std::move(weight_models),
                          TextSetMeta(weight_ids, std::vector<std::int64_t>(spec.weight_dim, 1))),
      std::move(outliers)};
}

}  // namespace modelmap::cli
