#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace modelmap {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// Identifiers and byte lengths of the evaluation texts (the columns).
class TextSetMeta {
 public:
  TextSetMeta() = default;
  /// Throws DataError on non-positive lengths, duplicate ids or size mismatch.
  TextSetMeta(std::vector<std::string> ids, std::vector<std::int64_t> byte_lengths);

  /// `n` texts named "t0".."t{n-1}", each one byte long.
  static TextSetMeta synthetic(std::size_t n);

  const std::vector<std::string>& ids() const { return ids_; }
  const std::vector<std::int64_t>& byte_lengths() const { return byte_lengths_; }
  std::size_t size() const { return ids_.size(); }
  /// Mean text length in bytes.
  double mean_bytes() const { return mean_bytes_; }

  TextSetMeta subset(const std::vector<std::size_t>& columns) const;

 private:
  std::vector<std::string> ids_;
  std::vector<std::int64_t> byte_lengths_;
  double mean_bytes_ = 0.0;
};

/// Experimental factors attached to one model (row).
struct ModelMeta {
  std::string id;
  std::optional<std::string> group;
  std::optional<std::int64_t> step;
  std::map<std::string, std::string> tags;

  bool operator==(const ModelMeta&) const = default;
};

std::vector<ModelMeta> synthetic_models(std::size_t k);

using ModelPredicate = std::function<bool(const ModelMeta&)>;

/// K x N matrix of per-text log-likelihoods in nats. Rows are models.
class LogLikelihoodMatrix {
 public:
  LogLikelihoodMatrix() = default;
  /// Validates shape, finiteness and model id uniqueness (DataError).
  LogLikelihoodMatrix(Matrix values, std::vector<ModelMeta> models, TextSetMeta texts,
                      bool synthetic_metadata = false);

  const Matrix& values() const { return values_; }
  const std::vector<ModelMeta>& models() const { return models_; }
  const TextSetMeta& texts() const { return texts_; }
  std::size_t num_models() const { return static_cast<std::size_t>(values_.rows()); }
  std::size_t num_texts() const { return static_cast<std::size_t>(values_.cols()); }
  /// Set when the metadata sidecar was missing at load time.
  bool synthetic_metadata() const { return synthetic_metadata_; }

  std::optional<std::size_t> find_model(const std::string& id) const;

 private:
  Matrix values_;
  std::vector<ModelMeta> models_;
  TextSetMeta texts_;
  bool synthetic_metadata_ = false;
};

enum class Scale { raw_nats, bits_per_byte };

const char* to_string(Scale s);

/// Double-centered coordinates. Squared row distances estimate 2N*KL in
/// nats (raw_nats) or KL in bits/byte (bits_per_byte).
class CenteredMap {
 public:
  CenteredMap() = default;
  CenteredMap(Matrix coords, Scale scale, std::vector<ModelMeta> models, TextSetMeta texts,
              bool centering_inherited = false);

  const Matrix& coords() const { return coords_; }
  Scale scale() const { return scale_; }
  const std::vector<ModelMeta>& models() const { return models_; }
  const TextSetMeta& texts() const { return texts_; }
  std::size_t num_models() const { return static_cast<std::size_t>(coords_.rows()); }
  std::size_t num_texts() const { return static_cast<std::size_t>(coords_.cols()); }
  /// True when this map is a row subset of a map centered over a larger model set.
  bool centering_inherited() const { return centering_inherited_; }

  std::optional<std::size_t> find_model(const std::string& id) const;

 private:
  Matrix coords_;
  Scale scale_ = Scale::raw_nats;
  std::vector<ModelMeta> models_;
  TextSetMeta texts_;
  bool centering_inherited_ = false;
};

/// Entrywise exp of map coordinates. Not re-centered.
struct ExpMap {
  Matrix values;
  std::vector<ModelMeta> models;
  Scale source_scale = Scale::raw_nats;
  std::size_t capped_entries = 0;
};

/// Raise every entry below the q-quantile of the flattened matrix to that
/// quantile. Quantiles interpolate linearly between order statistics.
LogLikelihoodMatrix clip_bottom_quantile(const LogLikelihoodMatrix& m, double q);

/// Q = L - rowmean - colmean + grandmean. Requires K >= 2 and N >= 2.
CenteredMap double_center(const LogLikelihoodMatrix& m);

/// Re-applies double centering to the coordinates of an existing map.
CenteredMap double_center(const CenteredMap& c);

/// Divides raw-nat coordinates by sqrt(2 N Bbar ln 2).
CenteredMap rescale_bits_per_byte(const CenteredMap& c);

double bits_per_byte_divisor(std::size_t num_texts, double mean_bytes);

struct ExpOptions {
  double cap = 30.0;
  /// Permit exponentiating bits/byte coordinates instead of raw nats.
  bool allow_rescaled = false;
};

ExpMap exp_coordinates(const CenteredMap& c, const ExpOptions& options = {});

/// Row subset. Throws DataError when nothing matches.
LogLikelihoodMatrix select_rows(const LogLikelihoodMatrix& m, const ModelPredicate& keep);

/// Row subset of a map. Without `recenter` the parent's centering is kept
/// and flagged as inherited.
CenteredMap select_rows(const CenteredMap& c, const ModelPredicate& keep, bool recenter = false);

std::vector<std::size_t> matching_rows(const std::vector<ModelMeta>& models,
                                       const ModelPredicate& keep);

/// Drops the given columns and recomputes the text metadata.
LogLikelihoodMatrix remove_columns(const LogLikelihoodMatrix& m,
                                   const std::vector<std::size_t>& columns);

/// Keeps only the given columns, in the given order.
LogLikelihoodMatrix keep_columns(const LogLikelihoodMatrix& m,
                                 const std::vector<std::size_t>& columns);

}  // namespace modelmap
