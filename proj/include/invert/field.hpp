#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <vector>

namespace invert {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

using ScalarFunction = std::function<double(Point)>;

/// A finite parameter vector u = (u_1, ..., u_J) with every coordinate in [-1, 1].
class ParamVector {
 public:
  ParamVector() = default;
  explicit ParamVector(std::vector<double> coords);
  ParamVector(std::initializer_list<double> coords) : ParamVector(std::vector<double>(coords)) {}

  static ParamVector zeros(std::size_t dim) { return ParamVector(std::vector<double>(dim, 0.0)); }

  std::size_t size() const noexcept { return coords_.size(); }
  double operator[](std::size_t j) const { return coords_[j]; }
  std::span<const double> coords() const noexcept { return coords_; }

 private:
  std::vector<double> coords_;
};

/// One term psi_j of the affine expansion together with its cached norms.
struct CoefficientMode {
  ScalarFunction fn;
  double sup_norm = 0.0;
  double grad_sup_norm = 0.0;
};

/// Parametric diffusion coefficient K(x, u) = Kbar(x) + sum_j u_j psi_j(x).
///
/// Construction validates the contraction condition
/// sum_j |psi_j|_inf <= kappa / (1 + kappa) * Kbar_min and the non-increasing
/// ordering of the mode sup-norms. Immutable afterwards; safe to share.
class CoefficientField {
 public:
  CoefficientField(int dim, ScalarFunction kbar, double kbar_min, double kbar_max,
                   std::vector<CoefficientMode> modes, double kappa, double decay_s);

  int dim() const noexcept { return dim_; }
  std::size_t n_modes() const noexcept { return modes_.size(); }
  double kappa() const noexcept { return kappa_; }
  double decay_s() const noexcept { return decay_s_; }
  double kbar_min() const noexcept { return kbar_min_; }
  double kbar_max() const noexcept { return kbar_max_; }

  /// Uniform ellipticity bounds valid for every u in [-1,1]^N.
  double k_min() const noexcept { return kbar_min_ / (1.0 + kappa_); }
  double k_max() const noexcept { return kbar_max_ + kappa_ * kbar_min_ / (1.0 + kappa_); }

  double kbar(Point x) const { return kbar_(x); }
  double mode(std::size_t j, Point x) const { return modes_[j].fn(x); }
  const CoefficientMode& mode_info(std::size_t j) const { return modes_[j]; }

  std::span<const double> sup_norms() const noexcept { return sup_norms_; }
  double sup_norm_sum() const noexcept;

  /// K^J(x, u) with J = u.size(); requires J <= n_modes().
  double eval(std::span<const double> u, Point x) const;
  double eval(const ParamVector& u, Point x) const { return eval(u.coords(), x); }

  /// sum_{j > J} |psi_j|_inf over the stored modes.
  double truncation_tail(std::size_t J) const noexcept;

 private:
  int dim_;
  ScalarFunction kbar_;
  double kbar_min_;
  double kbar_max_;
  std::vector<CoefficientMode> modes_;
  std::vector<double> sup_norms_;
  double kappa_;
  double decay_s_;
};

/// Kbar = 1 with sine modes psi_j = c j^{-s} sin(j pi x) in 1D, or tensor
/// products c (ik)^{-s} sin(i pi x) sin(k pi y) in 2D ordered by sup-norm
/// (ties broken lexicographically in (i, k)). c normalizes
/// sum_j |psi_j|_inf to kappa / (1 + kappa).
CoefficientField builtin_field(int dim, double s, double kappa, std::size_t n_modes);

}  // namespace invert
