#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "invert/forward.hpp"
#include "invert/parallel.hpp"
#include "invert/quadrature.hpp"

namespace invert {

/// Additive Gaussian noise N(0, Sigma) on the observation vector.
class NoiseModel {
 public:
  explicit NoiseModel(Eigen::MatrixXd covariance);

  /// Sigma = sigma^2 I. sigma = 0 is accepted but such a model can only be
  /// used to synthesize noise-free data, not to weight misfits.
  static NoiseModel isotropic(std::size_t k, double sigma);

  std::size_t size() const noexcept { return static_cast<std::size_t>(cov_.rows()); }
  bool degenerate() const noexcept { return degenerate_; }
  const Eigen::MatrixXd& covariance() const noexcept { return cov_; }

  /// |v|_Sigma^2 = v^T Sigma^{-1} v.
  double weighted_norm2(std::span<const double> v) const;
  /// Sigma^{1/2} xi, with Sigma^{1/2} the Cholesky factor.
  std::vector<double> correlate(std::span<const double> xi) const;

 private:
  Eigen::MatrixXd cov_;
  Eigen::MatrixXd chol_;  // lower factor
  bool degenerate_ = false;
};

/// Data vector and noise model; potential = 0.5 |delta - G|_Sigma^2.
struct Likelihood {
  std::vector<double> data;
  NoiseModel noise;

  double potential(const ForwardOutput& out) const;
  double potential(std::span<const double> g) const;
};

/// A forward evaluator paired with a likelihood; defines Phi(u) for one
/// discretization (exact reference, truncated (J, l), or surrogate).
struct PosteriorSpec {
  const ForwardModel* model = nullptr;
  std::shared_ptr<const Likelihood> likelihood;

  std::size_t truncation() const { return model->truncation(); }
  double potential(EvalContext& ctx) const { return likelihood->potential(ctx.at(*model)); }
  double potential(std::span<const double> u) const;
};

/// delta = G_ref(u_true) + Sigma^{1/2} xi with xi drawn from the seeded stream.
std::vector<double> synthesize_data(const ForwardModel& reference, std::span<const double> u_true,
                                    const NoiseModel& noise, std::uint64_t seed);

/// Normalizers and Hellinger distance between two posteriors on the same
/// parameter space, by tensor Gauss-Legendre quadrature.
struct HellingerResult {
  double distance = 0.0;
  double z_a = 0.0;
  double z_b = 0.0;
};

HellingerResult hellinger_quadrature(const PosteriorSpec& a, const PosteriorSpec& b, std::size_t quad_order,
                                     Execution exec = Execution::parallel, ForwardCache* cache = nullptr);

}  // namespace invert
