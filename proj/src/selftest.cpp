#include "invert/selftest.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "invert/bayes.hpp"
#include "invert/fem.hpp"
#include "invert/field.hpp"
#include "invert/forward.hpp"
#include "invert/gpc.hpp"
#include "invert/mlmcmc.hpp"
#include "invert/oracle.hpp"
#include "invert/quadrature.hpp"
#include "invert/sampler.hpp"
#include "invert/stats.hpp"

namespace invert {

namespace {

class Recorder {
 public:
  void check(const std::string& name, double value, double expected, double tol) {
    cases_.push_back({name, value, expected, tol, std::abs(value - expected) <= tol});
  }
  std::vector<SelftestCase> take() { return std::move(cases_); }

 private:
  std::vector<SelftestCase> cases_;
};

double one(Point) { return 1.0; }

}  // namespace

std::vector<SelftestCase> run_selftest() {
  Recorder r;

  {
    const CoefficientField f = builtin_field(1, 2.0, 1.0, 1);
    r.check("field.single_mode_sup_norm", f.sup_norms()[0], 0.5, 1e-15);
    r.check("field.k_min", f.k_min(), 0.5, 1e-15);
    r.check("field.k_max", f.k_max(), 1.5, 1e-15);
    r.check("field.eval_u_plus", f.eval(ParamVector{1.0}, {0.5, 0.0}), 1.5, 1e-14);
    r.check("field.eval_u_minus", f.eval(ParamVector{-1.0}, {0.5, 0.0}), 0.5, 1e-14);
    r.check("field.eval_zero", f.eval(ParamVector{0.0}, {0.3, 0.0}), 1.0, 0.0);
    r.check("field.tail_empty", f.truncation_tail(1), 0.0, 0.0);
    r.check("field.tail_full", f.truncation_tail(0), 0.5, 1e-15);
    const CoefficientField f2 = builtin_field(1, 2.0, 1.0, 2);
    r.check("field.decay_ratio", f2.sup_norms()[0] / f2.sup_norms()[1], 4.0, 1e-12);
  }

  {
    const FemLevel lvl(1, 1);
    const CsrMatrix& a = lvl.laplacian();
    r.check("fem.laplacian_diag", a.at(1, 1), 8.0, 1e-12);
    r.check("fem.laplacian_offdiag", a.at(1, 0), -4.0, 1e-12);
    r.check("fem.load_interior", lvl.integrate_basis(one)[1], 0.25, 1e-14);
    const CoefficientField f = builtin_field(1, 2.0, 1.0, 1);
    const FemLevel l5(1, 5);
    const ForwardSolution sol = solve(l5, f, std::vector<double>{0.0}, one, 1e-12);
    double err = 0.0;
    for (std::size_t i = 0; i < l5.n_dof(); ++i) {
      const double x = l5.dof_point(i).x;
      err = std::max(err, std::abs(sol.nodal[i] - 0.5 * x * (1.0 - x)));
    }
    r.check("fem.nodal_exactness", err, 0.0, 1e-10);
    const ForwardSolution zero = solve(l5, f, std::vector<double>{0.3}, [](Point) { return 0.0; }, 1e-12);
    r.check("fem.zero_load_iterations", static_cast<double>(zero.iterations), 0.0, 0.0);
  }

  {
    Likelihood lik{{0.6}, NoiseModel::isotropic(1, 1.0)};
    r.check("bayes.potential_arithmetic", lik.potential(std::vector<double>{0.0}), 0.18, 1e-15);
    ModelFamily fam(ProblemSetup{1, 2.0, 1.0, 1, 4, 1e-10});
    const FemForward& m = fam.forward(1, 3);
    const std::vector<double> u{0.4};
    const auto clean = m.evaluate(u).observations;
    const auto delta = synthesize_data(m, u, NoiseModel::isotropic(4, 0.0), 7);
    double diff = 0.0;
    for (std::size_t i = 0; i < 4; ++i) diff = std::max(diff, std::abs(delta[i] - clean[i]));
    r.check("bayes.noise_free_data", diff, 0.0, 0.0);
  }

  {
    r.check("sampler.alpha_equal", acceptance_prob(0.7, 0.7), 1.0, 0.0);
    r.check("sampler.alpha_ratio", acceptance_prob(0.5, 1.2), std::exp(-0.7), 1e-15);
    r.check("sampler.alpha_capped", acceptance_prob(2.0, 0.3), 1.0, 0.0);
    const Observables unit = scalar_observable([](EvalContext&) { return 1.0; });
    const auto est = run_estimate([](EvalContext& ctx) { return ctx.u()[0] * ctx.u()[0]; }, 1, unit, 400, 0, 3);
    r.check("sampler.constant_mean", est.mean[0], 1.0, 0.0);
    r.check("sampler.constant_se", est.se[0], 0.0, 0.0);
  }

  {
    r.check("gpc.L0", legendre_eval(0, -0.3), 1.0, 0.0);
    r.check("gpc.L1_half", legendre_eval(1, 0.5), std::sqrt(3.0) / 2.0, 1e-15);
    r.check("gpc.tensor_zero", tensor_legendre(MultiIndex{}, std::vector<double>{0.2, 0.1}), 1.0, 0.0);
    const QoiCutoff cut(2.0);
    r.check("gpc.cutoff_clamp", cut(7.0), 2.0, 0.0);
    r.check("gpc.cutoff_pass", cut(-1.5), -1.5, 0.0);
  }

  {
    const MlmcmcSchedule s4 = make_schedule(4, 1.0, 0);
    r.check("mlmcmc.M_11", static_cast<double>(s4.M(1, 1)), 16.0, 0.0);
    r.check("mlmcmc.Lprime_3", s4.l_prime_max[3], 1.0, 0.0);
    const MlmcmcSchedule s3 = make_schedule(3, 1.0, 0);
    for (int l = 0; l <= 3; ++l) {
      r.check("mlmcmc.J_" + std::to_string(l), static_cast<double>(s3.J[static_cast<std::size_t>(l)]),
              std::ldexp(1.0, l), 0.0);
    }
  }

  {
    const QuadratureGrid g(3, 5);
    double w = 0.0;
    for (std::size_t m = 0; m < g.size(); ++m) w += g.weight(m);
    r.check("oracle.weights_sum", w, 1.0, 1e-14);
    ModelFamily fam(ProblemSetup{1, 2.0, 1.0, 2, 4, 1e-10});
    auto lik = std::make_shared<Likelihood>(Likelihood{{0.05, 0.06, 0.06, 0.05}, NoiseModel::isotropic(4, 0.1)});
    const PosteriorSpec spec{&fam.forward(2, 2), lik};
    const auto e = posterior_expectation_quadrature(
        spec, scalar_observable([](EvalContext&) { return 3.25; }), QuadratureGrid(2, 6), nullptr, Execution::serial);
    r.check("oracle.constant_integrand", e.mean[0], 3.25, 1e-13);
  }

  {
    const std::vector<double> x{1, 2, 4, 8};
    const std::vector<double> inv{1, 0.5, 0.25, 0.125};
    const std::vector<double> c{3, 3, 3, 3};
    r.check("harness.fit_inverse", fit_rate(x, inv).slope, -1.0, 1e-12);
    r.check("harness.fit_inverse_r2", fit_rate(x, inv).r2, 1.0, 1e-12);
    r.check("harness.fit_constant", fit_rate(x, c).slope, 0.0, 1e-12);
  }

  return r.take();
}

std::string selftest_csv(const std::vector<SelftestCase>& cases) {
  std::ostringstream os;
  os << "name,value,expected,tolerance,pass\n";
  char buf[128];
  for (const auto& c : cases) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.3g,%d", c.value, c.expected, c.tolerance, c.pass ? 1 : 0);
    os << c.name << ',' << buf << '\n';
  }
  return os.str();
}

}  // namespace invert
