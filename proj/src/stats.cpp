#include "invert/stats.hpp"

#include <cmath>
#include <stdexcept>

namespace invert {

RateFit fit_line(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("fit: x and y differ in length");
  if (x.size() < 3) throw std::invalid_argument("fit: need at least three points");
  const double mx = mean(x);
  const double my = mean(y);
  double sxx = 0.0;
  double sxy = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (!(sxx > 1e-300)) throw std::invalid_argument("fit: degenerate x range");
  RateFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r2 = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return f;
}

RateFit fit_rate_log2x(std::span<const double> log2x, std::span<const double> y) {
  std::vector<double> ly(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (!(y[i] > 0.0)) throw std::invalid_argument("fit_rate: y values must be positive");
    ly[i] = std::log2(y[i]);
  }
  return fit_line(log2x, ly);
}

RateFit fit_rate(std::span<const double> x, std::span<const double> y) {
  std::vector<double> lx(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0)) throw std::invalid_argument("fit_rate: x values must be positive");
    lx[i] = std::log2(x[i]);
  }
  return fit_rate_log2x(lx, y);
}

double mean(std::span<const double> x) {
  if (x.empty()) return 0.0;
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

double variance(std::span<const double> x) {
  if (x.size() < 2) return 0.0;
  const double m = mean(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return s / static_cast<double>(x.size() - 1);
}

double rmse(std::span<const double> x, double truth) {
  if (x.empty()) return 0.0;
  double s = 0.0;
  for (double v : x) s += (v - truth) * (v - truth);
  return std::sqrt(s / static_cast<double>(x.size()));
}

double correlation(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("correlation: need matching series");
  const double mx = mean(x);
  const double my = mean(y);
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace invert
