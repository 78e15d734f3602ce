#include "invert/bayes.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "invert/rng.hpp"

namespace invert {

NoiseModel::NoiseModel(Eigen::MatrixXd covariance) : cov_(std::move(covariance)) {
  if (cov_.rows() == 0 || cov_.rows() != cov_.cols()) throw std::invalid_argument("NoiseModel: covariance must be square");
  if (!cov_.isApprox(cov_.transpose(), 1e-12)) throw std::invalid_argument("NoiseModel: covariance must be symmetric");
  if (cov_.isZero(0.0)) {
    degenerate_ = true;
    chol_ = Eigen::MatrixXd::Zero(cov_.rows(), cov_.cols());
    return;
  }
  Eigen::LLT<Eigen::MatrixXd> llt(cov_);
  if (llt.info() != Eigen::Success) throw std::invalid_argument("NoiseModel: covariance is not positive definite");
  chol_ = llt.matrixL();
}

NoiseModel NoiseModel::isotropic(std::size_t k, double sigma) {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw std::invalid_argument("NoiseModel: sigma must be finite and >= 0");
  const auto n = static_cast<Eigen::Index>(k);
  return NoiseModel(Eigen::MatrixXd::Identity(n, n) * (sigma * sigma));
}

double NoiseModel::weighted_norm2(std::span<const double> v) const {
  if (degenerate_) throw std::logic_error("NoiseModel: zero covariance cannot weight a misfit");
  if (v.size() != size()) throw std::invalid_argument("NoiseModel: misfit length mismatch");
  Eigen::Map<const Eigen::VectorXd> r(v.data(), static_cast<Eigen::Index>(v.size()));
  const Eigen::VectorXd w = chol_.triangularView<Eigen::Lower>().solve(r);
  return w.squaredNorm();
}

std::vector<double> NoiseModel::correlate(std::span<const double> xi) const {
  if (xi.size() != size()) throw std::invalid_argument("NoiseModel: noise length mismatch");
  Eigen::Map<const Eigen::VectorXd> x(xi.data(), static_cast<Eigen::Index>(xi.size()));
  const Eigen::VectorXd y = chol_.triangularView<Eigen::Lower>() * x;
  return {y.data(), y.data() + y.size()};
}

double Likelihood::potential(std::span<const double> g) const {
  if (g.size() != data.size()) throw std::invalid_argument("Likelihood: observation length mismatch");
  std::vector<double> r(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) r[i] = data[i] - g[i];
  return 0.5 * noise.weighted_norm2(r);
}

double Likelihood::potential(const ForwardOutput& out) const { return potential(out.observations); }

double PosteriorSpec::potential(std::span<const double> u) const {
  return likelihood->potential(model->evaluate(u));
}

std::vector<double> synthesize_data(const ForwardModel& reference, std::span<const double> u_true,
                                    const NoiseModel& noise, std::uint64_t seed) {
  for (double x : u_true) {
    if (!(x >= -1.0 && x <= 1.0)) throw std::invalid_argument("synthesize_data: u_true outside [-1,1]");
  }
  const ForwardOutput out = reference.evaluate(u_true);
  const std::size_t k = out.observations.size();
  if (noise.size() != k) throw std::invalid_argument("synthesize_data: noise dimension mismatch");
  std::vector<double> delta = out.observations;
  if (noise.degenerate()) return delta;
  CounterRng rng(seed, 0);
  std::vector<double> xi(k);
  for (std::size_t i = 0; i < k; ++i) xi[i] = rng.normal(0, i);
  const std::vector<double> eta = noise.correlate(xi);
  for (std::size_t i = 0; i < k; ++i) delta[i] += eta[i];
  return delta;
}

HellingerResult hellinger_quadrature(const PosteriorSpec& a, const PosteriorSpec& b, std::size_t quad_order,
                                     Execution exec, ForwardCache* cache) {
  const std::size_t J = std::max(a.truncation(), b.truncation());
  if (a.truncation() != b.truncation()) {
    throw std::invalid_argument("hellinger_quadrature: specs must share the truncation dimension");
  }
  if (J > kMaxQuadratureDims) {
    throw GridTooLarge(J, quad_order, std::pow(static_cast<double>(quad_order), static_cast<double>(J)));
  }
  const QuadratureGrid grid(J, quad_order);
  std::vector<double> phi_a(grid.size());
  std::vector<double> phi_b(grid.size());
  for_each_index(grid.size(), exec, [&](std::size_t m) {
    const std::vector<double> u = grid.node(m);
    EvalContext ctx(u, cache);
    phi_a[m] = a.potential(ctx);
    phi_b[m] = b.potential(ctx);
  });

  HellingerResult res;
  for (std::size_t m = 0; m < grid.size(); ++m) {
    res.z_a += grid.weight(m) * std::exp(-phi_a[m]);
    res.z_b += grid.weight(m) * std::exp(-phi_b[m]);
  }
  double sum = 0.0;
  for (std::size_t m = 0; m < grid.size(); ++m) {
    const double d = std::exp(-0.5 * phi_a[m]) / std::sqrt(res.z_a) - std::exp(-0.5 * phi_b[m]) / std::sqrt(res.z_b);
    sum += grid.weight(m) * d * d;
  }
  res.distance = std::sqrt(std::clamp(0.5 * sum, 0.0, 1.0));
  return res;
}

}  // namespace invert
