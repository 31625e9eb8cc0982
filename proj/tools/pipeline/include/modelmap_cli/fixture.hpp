#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "modelmap/matrix.hpp"

namespace modelmap::cli {

/// Synthetic training runs for smoke tests and demos. Each group follows a
/// Brownian path in weight space; its log-likelihoods are a Takagi-type
/// image of that path, so weight space and map space scale differently.
struct FixtureSpec {
  std::uint64_t seed = 0;
  std::size_t n_texts = 200;
  std::vector<std::string> groups{"run-a", "run-b"};
  std::size_t checkpoints = 40;
  std::int64_t start_step = 1000;
  std::int64_t step_stride = 1000;
  std::size_t weight_dim = 16;
  double alpha = 0.3;
  /// Multiplies weight coordinates before the map.
  double input_scale = 1.0 / 1024.0;
  /// Nats per unit of map output.
  double amplitude = 40.0;
  /// SD (nats) of each group's fixed per-text offset.
  double group_separation = 2.0;
  /// Texts whose log-likelihood flips by a large amount at every checkpoint.
  std::size_t outlier_texts = 0;
  /// Checkpoint whose weights jump away and come back.
  std::optional<std::int64_t> weight_spike_step;
  /// Adds a "<group>/8bit" twin of each group's last `quantized_twins`
  /// checkpoints. Twin shifts share a direction within a group.
  std::size_t quantized_twins = 0;
  /// Groups whose offsets are five times larger than the others.
  std::vector<std::string> anomalous_groups;
};

struct Fixture {
  LogLikelihoodMatrix loglik;
  /// Same models (twins excluded); columns are weight coordinates.
  LogLikelihoodMatrix weights;
  /// Column indices of the planted outlier texts.
  std::vector<std::size_t> outlier_texts;
};

Fixture make_fixture(const FixtureSpec& spec);

}  // namespace modelmap::cli
