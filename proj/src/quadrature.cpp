#include "invert/quadrature.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <string>

namespace invert {

GaussLegendreRule gauss_legendre(std::size_t n) {
  if (n == 0) throw std::invalid_argument("gauss_legendre: need at least one point");
  if (n == 1) return {{0.0}, {2.0}};
  GaussLegendreRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  const std::size_t half = (n + 1) / 2;
  for (std::size_t i = 0; i < half; ++i) {
    // Chebyshev-like initial guess, then Newton on P_n.
    double x = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) / (static_cast<double>(n) + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0;
      double p1 = x;
      for (std::size_t k = 2; k <= n; ++k) {
        const double kk = static_cast<double>(k);
        const double p2 = ((2.0 * kk - 1.0) * x * p1 - (kk - 1.0) * p0) / kk;
        p0 = p1;
        p1 = p2;
      }
      dp = static_cast<double>(n) * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    // Recompute the derivative at the converged root for the weight.
    double p0 = 1.0;
    double p1 = x;
    for (std::size_t k = 2; k <= n; ++k) {
      const double kk = static_cast<double>(k);
      const double p2 = ((2.0 * kk - 1.0) * x * p1 - (kk - 1.0) * p0) / kk;
      p0 = p1;
      p1 = p2;
    }
    dp = static_cast<double>(n) * (x * p1 - p0) / (x * x - 1.0);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes[i] = -x;
    rule.nodes[n - 1 - i] = x;
    rule.weights[i] = w;
    rule.weights[n - 1 - i] = w;
  }
  if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
  return rule;
}

namespace {

std::string grid_message(std::size_t dims, std::size_t points, double est) {
  std::ostringstream os;
  os << "tensor grid with " << points << "^" << dims << " = " << est << " nodes exceeds the limit of "
     << kMaxGridNodes;
  return os.str();
}

}  // namespace

GridTooLarge::GridTooLarge(std::size_t dims, std::size_t points, double estimated_nodes)
    : std::invalid_argument(grid_message(dims, points, estimated_nodes)), estimated_(estimated_nodes) {}

QuadratureGrid::QuadratureGrid(std::size_t dims, std::size_t points_per_dim) : dims_(dims) {
  if (points_per_dim == 0) throw std::invalid_argument("QuadratureGrid: need at least one point per dimension");
  const double est = std::pow(static_cast<double>(points_per_dim), static_cast<double>(dims));
  if (est > static_cast<double>(kMaxGridNodes)) throw GridTooLarge(dims, points_per_dim, est);
  rule_ = gauss_legendre(points_per_dim);
  for (double& w : rule_.weights) w *= 0.5;
  size_ = 1;
  stride_.resize(dims);
  for (std::size_t j = 0; j < dims; ++j) {
    stride_[j] = size_;
    size_ *= points_per_dim;
  }
}

std::size_t QuadratureGrid::index(std::size_t m, std::size_t j) const noexcept {
  return (m / stride_[j]) % rule_.nodes.size();
}

void QuadratureGrid::node(std::size_t m, std::span<double> u) const {
  for (std::size_t j = 0; j < dims_; ++j) u[j] = rule_.nodes[index(m, j)];
}

std::vector<double> QuadratureGrid::node(std::size_t m) const {
  std::vector<double> u(dims_);
  node(m, u);
  return u;
}

double QuadratureGrid::weight(std::size_t m) const noexcept {
  double w = 1.0;
  for (std::size_t j = 0; j < dims_; ++j) w *= rule_.weights[index(m, j)];
  return w;
}

}  // namespace invert
