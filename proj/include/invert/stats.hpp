#pragma once

#include <span>
#include <vector>

namespace invert {

/// Least-squares line through (log2 x, log2 y).
struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

/// Needs at least three points with positive values and a nondegenerate x range.
RateFit fit_rate(std::span<const double> x, std::span<const double> y);
/// Same fit with x already on a log2 scale (e.g. a level index).
RateFit fit_rate_log2x(std::span<const double> log2x, std::span<const double> y);
/// Ordinary least squares on raw axes.
RateFit fit_line(std::span<const double> x, std::span<const double> y);

double mean(std::span<const double> x);
/// Unbiased sample variance; 0 for fewer than two values.
double variance(std::span<const double> x);
/// sqrt(mean((x_i - truth)^2)).
double rmse(std::span<const double> x, double truth);
/// Pearson correlation.
double correlation(std::span<const double> x, std::span<const double> y);

}  // namespace invert
