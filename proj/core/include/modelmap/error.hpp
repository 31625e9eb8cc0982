#pragma once

#include <stdexcept>
#include <string>

namespace modelmap {

/// Malformed or inconsistent input data (files, matrices, metadata).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An analysis could not be carried out on otherwise valid data
/// (too few points for a fit, infeasible perplexity, ...).
class AnalysisError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid experiment configuration or command-line arguments.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace modelmap
