#include "invert/oracle.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

namespace invert {

QuadratureExpectation weighted_expectation_quadrature(const std::function<double(EvalContext&)>& potential,
                                                      const Observables& g, const QuadratureGrid& grid,
                                                      ForwardCache* cache, Execution exec) {
  const std::size_t n = grid.size();
  const std::size_t c = g.count;
  std::vector<double> phi(n);
  std::vector<double> values(n * c);
  std::vector<Work> work(n);
  for_each_index(n, exec, [&](std::size_t m) {
    const std::vector<double> u = grid.node(m);
    EvalContext ctx(u, cache);
    phi[m] = potential(ctx);
    g.fn(ctx, std::span<double>(values).subspan(m * c, c));
    work[m] = ctx.work();
  });

  QuadratureExpectation res;
  res.mean.assign(c, 0.0);
  for (std::size_t m = 0; m < n; ++m) {
    const double w = grid.weight(m) * std::exp(-phi[m]);
    res.z += w;
    for (std::size_t i = 0; i < c; ++i) res.mean[i] += w * values[m * c + i];
    res.max_potential = std::max(res.max_potential, phi[m]);
    res.work += work[m];
  }
  if (!(res.z > 0.0)) throw std::runtime_error("quadrature oracle: normalizer underflowed");
  for (double& v : res.mean) v /= res.z;
  return res;
}

QuadratureExpectation posterior_expectation_quadrature(const PosteriorSpec& spec, const Observables& g,
                                                       const QuadratureGrid& grid, ForwardCache* cache,
                                                       Execution exec) {
  if (grid.dims() < spec.truncation()) {
    throw std::invalid_argument("quadrature oracle: grid dimension below the spec's truncation");
  }
  return weighted_expectation_quadrature([&spec](EvalContext& ctx) { return spec.potential(ctx); }, g, grid, cache,
                                         exec);
}

std::vector<double> dense_solve(const CsrMatrix& a, std::span<const double> b) {
  if (a.n > kMaxDenseDofs) throw std::invalid_argument("dense_solve: system too large for the dense oracle");
  const auto n = static_cast<Eigen::Index>(a.n);
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t i = 0; i < a.n; ++i) {
    for (std::size_t p = a.row_ptr[i]; p < a.row_ptr[i + 1]; ++p) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(a.col[p])) = a.val[p];
    }
  }
  Eigen::Map<const Eigen::VectorXd> rhs(b.data(), n);
  const Eigen::VectorXd x = m.partialPivLu().solve(rhs);
  const double scale = m.norm() * x.norm() + rhs.norm();
  if (!x.allFinite() || (m * x - rhs).norm() > 1e-8 * scale) throw std::runtime_error("dense_solve: singular system");
  return {x.data(), x.data() + x.size()};
}

std::vector<double> dense_reference_solve(const FemLevel& level, const CoefficientField& field,
                                          std::span<const double> u, const ScalarFunction& f) {
  const AssembledSystem sys = assemble(level, field, u, f);
  return dense_solve(sys.matrix, sys.load);
}

}  // namespace invert
