#include "modelmap/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <set>
#include <string>
#include <unordered_set>

#include "modelmap/error.hpp"
#include "modelmap/stats.hpp"

namespace modelmap {

TextSetMeta::TextSetMeta(std::vector<std::string> ids, std::vector<std::int64_t> byte_lengths)
    : ids_(std::move(ids)), byte_lengths_(std::move(byte_lengths)) {
  if (ids_.size() != byte_lengths_.size()) {
    throw DataError("text metadata: " + std::to_string(ids_.size()) + " ids but " +
                    std::to_string(byte_lengths_.size()) + " byte lengths");
  }
  std::unordered_set<std::string> seen;
  double total = 0.0;
  for (std::size_t s = 0; s < ids_.size(); ++s) {
    if (byte_lengths_[s] <= 0) {
      throw DataError("text '" + ids_[s] + "' has non-positive byte length");
    }
    if (!seen.insert(ids_[s]).second) throw DataError("duplicate text id '" + ids_[s] + "'");
    total += static_cast<double>(byte_lengths_[s]);
  }
  mean_bytes_ = ids_.empty() ? 0.0 : total / static_cast<double>(ids_.size());
}

TextSetMeta TextSetMeta::synthetic(std::size_t n) {
  std::vector<std::string> ids;
  ids.reserve(n);
  for (std::size_t s = 0; s < n; ++s) ids.push_back("t" + std::to_string(s));
  return TextSetMeta(std::move(ids), std::vector<std::int64_t>(n, 1));
}

TextSetMeta TextSetMeta::subset(const std::vector<std::size_t>& columns) const {
  std::vector<std::string> ids;
  std::vector<std::int64_t> lengths;
  ids.reserve(columns.size());
  lengths.reserve(columns.size());
  for (std::size_t c : columns) {
    ids.push_back(ids_.at(c));
    lengths.push_back(byte_lengths_.at(c));
  }
  return TextSetMeta(std::move(ids), std::move(lengths));
}

std::vector<ModelMeta> synthetic_models(std::size_t k) {
  std::vector<ModelMeta> models(k);
  for (std::size_t i = 0; i < k; ++i) models[i].id = "m" + std::to_string(i);
  return models;
}

namespace {

void check_unique_ids(const std::vector<ModelMeta>& models) {
  std::unordered_set<std::string> seen;
  for (const auto& m : models) {
    if (!seen.insert(m.id).second) throw DataError("duplicate model_id '" + m.id + "'");
  }
}

std::optional<std::size_t> find_id(const std::vector<ModelMeta>& models, const std::string& id) {
  for (std::size_t i = 0; i < models.size(); ++i) {
    if (models[i].id == id) return i;
  }
  return std::nullopt;
}

Matrix center_rows_and_columns(const Matrix& values) {
  const Eigen::VectorXd row_mean = values.rowwise().mean();
  const Eigen::RowVectorXd col_mean = values.colwise().mean();
  const double grand = values.mean();
  Matrix q = values;
  q.colwise() -= row_mean;
  q.rowwise() -= col_mean;
  q.array() += grand;
  return q;
}

}  // namespace

LogLikelihoodMatrix::LogLikelihoodMatrix(Matrix values, std::vector<ModelMeta> models,
                                         TextSetMeta texts, bool synthetic_metadata)
    : values_(std::move(values)),
      models_(std::move(models)),
      texts_(std::move(texts)),
      synthetic_metadata_(synthetic_metadata) {
  if (static_cast<std::size_t>(values_.rows()) != models_.size()) {
    throw DataError("dimension mismatch: " + std::to_string(values_.rows()) + " rows but " +
                    std::to_string(models_.size()) + " models");
  }
  if (static_cast<std::size_t>(values_.cols()) != texts_.size()) {
    throw DataError("dimension mismatch: " + std::to_string(values_.cols()) + " columns but " +
                    std::to_string(texts_.size()) + " texts");
  }
  for (Eigen::Index i = 0; i < values_.rows(); ++i) {
    for (Eigen::Index j = 0; j < values_.cols(); ++j) {
      if (!std::isfinite(values_(i, j))) {
        throw DataError("non-finite entry at (" + std::to_string(i) + "," + std::to_string(j) +
                        ")");
      }
    }
  }
  check_unique_ids(models_);
}

std::optional<std::size_t> LogLikelihoodMatrix::find_model(const std::string& id) const {
  return find_id(models_, id);
}

const char* to_string(Scale s) {
  return s == Scale::raw_nats ? "raw_nats" : "bits_per_byte";
}

CenteredMap::CenteredMap(Matrix coords, Scale scale, std::vector<ModelMeta> models,
                         TextSetMeta texts, bool centering_inherited)
    : coords_(std::move(coords)),
      scale_(scale),
      models_(std::move(models)),
      texts_(std::move(texts)),
      centering_inherited_(centering_inherited) {
  if (static_cast<std::size_t>(coords_.rows()) != models_.size() ||
      static_cast<std::size_t>(coords_.cols()) != texts_.size()) {
    throw DataError("centered map: coordinate shape does not match metadata");
  }
  check_unique_ids(models_);
}

std::optional<std::size_t> CenteredMap::find_model(const std::string& id) const {
  return find_id(models_, id);
}

LogLikelihoodMatrix clip_bottom_quantile(const LogLikelihoodMatrix& m, double q) {
  if (!(q >= 0.0 && q < 1.0)) throw AnalysisError("clip quantile must lie in [0, 1)");
  if (q == 0.0 || m.values().size() == 0) return m;
  const auto& v = m.values();
  const double threshold =
      stats::quantile(std::span<const double>(v.data(), static_cast<std::size_t>(v.size())), q);
  Matrix clipped = v.cwiseMax(threshold);
  return LogLikelihoodMatrix(std::move(clipped), m.models(), m.texts(), m.synthetic_metadata());
}

CenteredMap double_center(const LogLikelihoodMatrix& m) {
  if (m.num_models() < 2 || m.num_texts() < 2) {
    throw AnalysisError("double centering needs at least 2 models and 2 texts (got " +
                        std::to_string(m.num_models()) + "x" + std::to_string(m.num_texts()) +
                        ")");
  }
  return CenteredMap(center_rows_and_columns(m.values()), Scale::raw_nats, m.models(), m.texts());
}

CenteredMap double_center(const CenteredMap& c) {
  if (c.num_models() < 2 || c.num_texts() < 2) {
    throw AnalysisError("double centering needs at least 2 models and 2 texts");
  }
  return CenteredMap(center_rows_and_columns(c.coords()), c.scale(), c.models(), c.texts());
}

double bits_per_byte_divisor(std::size_t num_texts, double mean_bytes) {
  return std::sqrt(2.0 * static_cast<double>(num_texts) * mean_bytes * std::numbers::ln2);
}

CenteredMap rescale_bits_per_byte(const CenteredMap& c) {
  if (c.scale() != Scale::raw_nats) throw AnalysisError("map is already in bits/byte");
  const double mean_bytes = c.texts().mean_bytes();
  if (!(mean_bytes > 0.0)) throw AnalysisError("mean text length must be positive");
  const double divisor = bits_per_byte_divisor(c.num_texts(), mean_bytes);
  return CenteredMap(c.coords() / divisor, Scale::bits_per_byte, c.models(), c.texts(),
                     c.centering_inherited());
}

ExpMap exp_coordinates(const CenteredMap& c, const ExpOptions& options) {
  if (c.scale() != Scale::raw_nats && !options.allow_rescaled) {
    throw AnalysisError("exp coordinates expect a raw-nat map (set allow_rescaled to override)");
  }
  ExpMap out;
  out.models = c.models();
  out.source_scale = c.scale();
  out.values.resize(c.coords().rows(), c.coords().cols());
  for (Eigen::Index i = 0; i < c.coords().rows(); ++i) {
    for (Eigen::Index j = 0; j < c.coords().cols(); ++j) {
      double x = c.coords()(i, j);
      if (x > options.cap) {
        x = options.cap;
        ++out.capped_entries;
      }
      out.values(i, j) = std::exp(x);
    }
  }
  return out;
}

std::vector<std::size_t> matching_rows(const std::vector<ModelMeta>& models,
                                       const ModelPredicate& keep) {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < models.size(); ++i) {
    if (keep(models[i])) rows.push_back(i);
  }
  return rows;
}

namespace {

template <typename Fn>
auto gather_rows(const Matrix& src, const std::vector<ModelMeta>& models,
                 const std::vector<std::size_t>& rows, Fn&& build) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), src.cols());
  std::vector<ModelMeta> kept;
  kept.reserve(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    out.row(static_cast<Eigen::Index>(r)) = src.row(static_cast<Eigen::Index>(rows[r]));
    kept.push_back(models[rows[r]]);
  }
  return build(std::move(out), std::move(kept));
}

}  // namespace

LogLikelihoodMatrix select_rows(const LogLikelihoodMatrix& m, const ModelPredicate& keep) {
  const auto rows = matching_rows(m.models(), keep);
  if (rows.empty()) throw DataError("row selection matched no models");
  return gather_rows(m.values(), m.models(), rows, [&](Matrix v, std::vector<ModelMeta> mm) {
    return LogLikelihoodMatrix(std::move(v), std::move(mm), m.texts(), m.synthetic_metadata());
  });
}

CenteredMap select_rows(const CenteredMap& c, const ModelPredicate& keep, bool recenter) {
  const auto rows = matching_rows(c.models(), keep);
  if (rows.empty()) throw DataError("row selection matched no models");
  CenteredMap sub = gather_rows(c.coords(), c.models(), rows, [&](Matrix v, std::vector<ModelMeta> mm) {
    return CenteredMap(std::move(v), c.scale(), std::move(mm), c.texts(),
                       rows.size() != c.num_models() || c.centering_inherited());
  });
  // Re-centering the selected rows of Q equals double-centering the same
  // rows of L: the dropped column means are constant across rows.
  if (recenter && sub.num_models() >= 2) return double_center(sub);
  return sub;
}

LogLikelihoodMatrix keep_columns(const LogLikelihoodMatrix& m,
                                 const std::vector<std::size_t>& columns) {
  if (columns.empty()) throw DataError("column selection is empty");
  Matrix out(m.values().rows(), static_cast<Eigen::Index>(columns.size()));
  for (std::size_t c = 0; c < columns.size(); ++c) {
    if (columns[c] >= m.num_texts()) throw DataError("text index out of range");
    out.col(static_cast<Eigen::Index>(c)) = m.values().col(static_cast<Eigen::Index>(columns[c]));
  }
  return LogLikelihoodMatrix(std::move(out), m.models(), m.texts().subset(columns),
                             m.synthetic_metadata());
}

LogLikelihoodMatrix remove_columns(const LogLikelihoodMatrix& m,
                                   const std::vector<std::size_t>& columns) {
  std::vector<bool> drop(m.num_texts(), false);
  for (std::size_t c : columns) {
    if (c >= m.num_texts()) throw DataError("text index " + std::to_string(c) + " out of range");
    drop[c] = true;
  }
  std::vector<std::size_t> kept;
  for (std::size_t c = 0; c < m.num_texts(); ++c) {
    if (!drop[c]) kept.push_back(c);
  }
  if (kept.empty()) throw DataError("cannot remove every text");
  return keep_columns(m, kept);
}

}  // namespace modelmap
