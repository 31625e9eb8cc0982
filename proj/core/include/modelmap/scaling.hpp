#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "modelmap/matrix.hpp"

namespace modelmap {

enum class Space { weights, loglik_map, exp_map };

const char* to_string(Space s);

/// Time-ordered points in weight space or map space.
struct Trajectory {
  std::vector<std::int64_t> steps;  // strictly increasing
  Matrix points;                    // one row per step
  Space space = Space::loglik_map;

  /// Throws DataError unless steps are strictly increasing and match the rows.
  void validate() const;
  std::optional<std::size_t> index_of(std::int64_t step) const;
  /// Keeps only the given steps (which must all be present), in order.
  Trajectory restrict_to(std::span<const std::int64_t> keep) const;
};

/// Rows of a matrix with training steps, sorted by step. Rows must carry
/// distinct steps.
Trajectory make_trajectory(const Matrix& rows, const std::vector<ModelMeta>& models, Space space);
Trajectory make_trajectory(const CenteredMap& c, const std::vector<std::size_t>& rows = {});
Trajectory make_trajectory(const LogLikelihoodMatrix& m, Space space = Space::weights);
Trajectory make_trajectory(const ExpMap& e, const std::vector<std::size_t>& rows = {});

inline constexpr std::size_t kDefaultWindowCheckpoints = 10;

/// Fit window past t0: either a step span (t - t0 <= span) or, when no
/// span is set, the next `checkpoints` checkpoints.
struct FitWindow {
  std::optional<std::int64_t> span_steps;
  std::size_t checkpoints = kDefaultWindowCheckpoints;

  static FitWindow steps(std::int64_t span) { return {span, 0}; }
  static FitWindow count(std::size_t n) { return {std::nullopt, n}; }
  /// Every later checkpoint.
  static FitWindow all() { return {std::nullopt, static_cast<std::size_t>(-1)}; }
};

struct Displacement {
  double lag = 0.0;
  double sq_distance = 0.0;
};

/// ||x_t - x_{t0}||^2 for each later step t in the window (zero lag excluded).
std::vector<Displacement> squared_displacement(const Trajectory& traj, std::int64_t t0,
                                               const FitWindow& window = {});

struct ScalingFit {
  double c = 0.0;
  double log_intercept = 0.0;  // natural log of the prefactor
  double r_squared = 0.0;
  std::int64_t t0 = 0;
  std::int64_t window = 0;  // largest lag used
  std::size_t n_points = 0;
  std::size_t dropped_nonpositive = 0;
};

/// OLS of log(sq_distance) on log(lag). Non-positive displacements are
/// dropped and counted; fewer than 3 remaining points is an AnalysisError.
ScalingFit fit_exponent(std::span<const Displacement> pairs);

ScalingFit fit_trajectory(const Trajectory& traj, std::int64_t t0, const FitWindow& window = {});

struct SweepEntry {
  std::int64_t t0 = 0;
  std::optional<ScalingFit> fit;
  std::string error;
};

struct ExponentSweep {
  Space space = Space::loglik_map;
  std::vector<SweepEntry> entries;

  /// Mean and population SD of R^2 over successful fits.
  std::pair<double, double> r_squared_summary() const;
};

ExponentSweep exponent_sweep(const Trajectory& traj, std::span<const std::int64_t> t0_grid,
                             const FitWindow& window = {}, unsigned threads = 1);

/// alpha = c_q / c_w. Throws AnalysisError when c_w <= 0.
double holder_exponent(double c_w, double c_q);
double holder_exponent(const ScalingFit& fit_w, const ScalingFit& fit_q);

struct FractalDimension {
  double dimension = 0.0;  // D = 2 / c
  double hurst = 0.0;      // H = c / 2
};

FractalDimension fractal_dimension(double c);

/// One row of the weight-space vs map-space comparison.
struct SpaceComparison {
  ScalingFit fit_w;
  ScalingFit fit_q;
  std::optional<ScalingFit> fit_exp_q;
  double c_w = 0.0;
  double c_q = 0.0;
  double alpha = 0.0;
  std::optional<double> c_exp_q;
  std::optional<double> diff;  // c_exp_q - c_q
};

/// Trajectories are restricted to their common steps before fitting.
SpaceComparison compare_spaces(const Trajectory& traj_w, const Trajectory& traj_q,
                               const Trajectory* traj_exp_q, std::int64_t t0,
                               const FitWindow& window = {});

}  // namespace modelmap
