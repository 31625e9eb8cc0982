#pragma once

#include <optional>
#include <string>
#include <vector>

#include "modelmap/matrix.hpp"
#include "modelmap/scaling.hpp"

namespace modelmap::svg {

struct LogLogSeries {
  std::string label;
  std::vector<Displacement> points;
  std::optional<ScalingFit> fit;
};

/// Squared displacement against lag on log-log axes, one series per space,
/// with fitted lines where available.
std::string loglog_plot(const std::vector<LogLogSeries>& series, const std::string& title);

struct PathStyle {
  /// Row indices of the embedding in drawing order (one trajectory).
  std::vector<std::size_t> rows;
  std::string label;
  /// Optional width per segment (size rows.size() - 1), e.g. proportional
  /// to consecutive KL.
  std::vector<double> segment_weights;
};

/// 2-D scatter of the first two embedding columns with a polyline per path.
std::string trajectory_plot(const Matrix& coords, const std::vector<PathStyle>& paths,
                            const std::string& title);

/// Simple line chart of y against x.
std::string line_plot(const std::vector<double>& x, const std::vector<std::vector<double>>& ys,
                      const std::vector<std::string>& labels, const std::string& title,
                      bool log_y = false);

}  // namespace modelmap::svg
