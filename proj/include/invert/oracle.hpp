#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "invert/bayes.hpp"
#include "invert/fem.hpp"
#include "invert/forward.hpp"
#include "invert/parallel.hpp"
#include "invert/quadrature.hpp"

namespace invert {

/// Posterior expectations of every component of g and the normalizer Z.
struct QuadratureExpectation {
  std::vector<double> mean;
  double z = 0.0;
  double max_potential = 0.0;
  Work work;
};

/// E[g] = sum_m w_m exp(-Phi(u_m)) g(u_m) / sum_m w_m exp(-Phi(u_m)) over the
/// tensor grid. Nodes are evaluated independently; the weighted sums run in
/// node order so the result does not depend on the execution mode.
QuadratureExpectation posterior_expectation_quadrature(const PosteriorSpec& spec, const Observables& g,
                                                       const QuadratureGrid& grid, ForwardCache* cache = nullptr,
                                                       Execution exec = Execution::parallel);

/// Same integral for a weight given directly as a potential over the context.
/// Used when the integrand involves several models (telescoping checks).
QuadratureExpectation weighted_expectation_quadrature(const std::function<double(EvalContext&)>& potential,
                                                      const Observables& g, const QuadratureGrid& grid,
                                                      ForwardCache* cache = nullptr,
                                                      Execution exec = Execution::parallel);

/// Largest system the dense oracle will factor.
inline constexpr std::size_t kMaxDenseDofs = 5000;

/// Assembles the same system as fem::solve and factors it densely (partial-pivot LU).
std::vector<double> dense_reference_solve(const FemLevel& level, const CoefficientField& field,
                                          std::span<const double> u, const ScalarFunction& f);

/// Dense LU solve of an arbitrary CSR system.
std::vector<double> dense_solve(const CsrMatrix& a, std::span<const double> b);

}  // namespace invert
