#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace modelmap::stats {

/// Quantile with linear interpolation between order statistics
/// (position q * (n - 1) in the sorted sample).
double quantile(std::span<const double> values, double q);
double quantile_sorted(std::span<const double> sorted, double q);

/// Midpoint rule for even n.
double median(std::span<const double> values);

double mean(std::span<const double> values);

/// Population standard deviation (divides by n).
double population_sd(std::span<const double> values);

/// Median absolute deviation from the median, unscaled.
double mad(std::span<const double> values);

/// Pearson correlation; throws AnalysisError on fewer than two points or
/// zero variance.
double pearson(std::span<const double> x, std::span<const double> y);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

/// Ordinary least squares of y on x.
LinearFit least_squares(std::span<const double> x, std::span<const double> y);

}  // namespace modelmap::stats
