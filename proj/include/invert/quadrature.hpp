#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace invert {

/// n-point Gauss-Legendre rule on [-1, 1]; weights sum to 2.
struct GaussLegendreRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

GaussLegendreRule gauss_legendre(std::size_t n);

/// Largest tensor grid the brute-force integrators will build (24^4 nodes).
inline constexpr std::size_t kMaxGridNodes = 331776;

/// Largest truncation dimension accepted by the quadrature diagnostics.
inline constexpr std::size_t kMaxQuadratureDims = 4;

/// Thrown when a tensor rule would exceed kMaxGridNodes.
class GridTooLarge : public std::invalid_argument {
 public:
  GridTooLarge(std::size_t dims, std::size_t points, double estimated_nodes);
  double estimated_nodes() const noexcept { return estimated_; }

 private:
  double estimated_;
};

/// Tensor Gauss-Legendre grid on [-1,1]^J for the uniform product measure
/// (weight 1/2 per coordinate), so the weights sum to one.
class QuadratureGrid {
 public:
  QuadratureGrid(std::size_t dims, std::size_t points_per_dim);

  std::size_t dims() const noexcept { return dims_; }
  std::size_t points_per_dim() const noexcept { return rule_.nodes.size(); }
  std::size_t size() const noexcept { return size_; }

  /// 1D index of coordinate j of node m (coordinate 0 varies fastest).
  std::size_t index(std::size_t m, std::size_t j) const noexcept;
  void node(std::size_t m, std::span<double> u) const;
  std::vector<double> node(std::size_t m) const;
  double weight(std::size_t m) const noexcept;

  const GaussLegendreRule& rule() const noexcept { return rule_; }

 private:
  std::size_t dims_;
  std::size_t size_;
  GaussLegendreRule rule_;
  std::vector<std::size_t> stride_;
};

}  // namespace invert
