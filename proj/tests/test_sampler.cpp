#include <cmath>
#include <memory>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "invert/bayes.hpp"
#include "invert/oracle.hpp"
#include "invert/sampler.hpp"
#include "invert/stats.hpp"

using namespace invert;

namespace {

struct Problem {
  ModelFamily family;
  PosteriorSpec spec;

  Problem(std::size_t J, int level, double sigma) : family(make_setup()) {
    const std::vector<double> u_true{0.5, -0.5, 0.25, -0.25};
    auto data = synthesize_data(family.forward(J, level + 2), std::span(u_true).first(J), NoiseModel::isotropic(4, 0.1), 1);
    spec = {&family.forward(J, level), std::make_shared<const Likelihood>(Likelihood{data, NoiseModel::isotropic(4, sigma)})};
  }

  static ProblemSetup make_setup() {
    ProblemSetup p;
    p.n_modes = 4;
    return p;
  }
};

Observables first_coordinate() {
  return scalar_observable([](EvalContext& ctx) { return ctx.u()[0]; });
}

}  // namespace

TEST_CASE("acceptance probability") {
  CHECK(acceptance_prob(0.7, 0.7) == 1.0);
  CHECK(acceptance_prob(0.5, 1.2) == doctest::Approx(0.496585).epsilon(1e-6));
  CHECK(acceptance_prob(2.0, 0.3) == 1.0);
  for (double pu : {0.0, 0.4, 3.0}) {
    for (double pv : {0.0, 0.2, 5.0}) CHECK(acceptance_prob(pu, pv) >= std::exp(-pv));
  }
}

TEST_CASE("flat likelihood accepts almost everything") {
  Problem p(2, 3, 1e6);
  ChainRun chain(p.spec, first_coordinate(), {.dimension = 2, .seed = 3});
  chain.run(10000);
  CHECK(chain.acceptance_rate() > 0.99);
  CHECK(chain.acceptance_rate() <= 1.0);
}

TEST_CASE("chains replay bit-identically") {
  Problem p(2, 3, 0.1);
  ChainOptions opts{.dimension = 2, .seed = 9, .stream = 4, .keep_states = true};
  ChainRun a(p.spec, first_coordinate(), opts), b(p.spec, first_coordinate(), opts);
  a.run(100);
  b.run(100);
  REQUIRE(a.state_trace().size() == 200);
  CHECK(std::equal(a.state_trace().begin(), a.state_trace().end(), b.state_trace().begin()));
  CHECK(a.accepted() == b.accepted());

  opts.stream = 5;
  ChainRun c(p.spec, first_coordinate(), opts);
  c.run(100);
  CHECK(!std::equal(a.state_trace().begin(), a.state_trace().end(), c.state_trace().begin()));
}

TEST_CASE("each step solves exactly once") {
  Problem p(2, 3, 0.1);
  ChainRun chain(p.spec, qoi_of(*p.spec.model), {.dimension = 2, .seed = 1});
  CHECK(chain.work().solves == 1);
  chain.run(50);
  CHECK(chain.work().solves == 51);
  CHECK(chain.retained() == 50);
}

TEST_CASE("acceptance rate stays above the potential bound") {
  Problem p(2, 4, 0.1);
  ChainRun chain(p.spec, qoi_of(*p.spec.model), {.dimension = 2, .seed = 2});
  chain.record_alphas(true);
  chain.run(10000);
  CHECK(chain.alpha_bound_violations() == 0);
  const double rate = chain.acceptance_rate();
  const double se = std::sqrt(rate * (1.0 - rate) / 10000.0);
  CHECK(rate >= std::exp(-chain.max_potential()) - 3.0 * se);
  CHECK(chain.alphas().size() == 10000);
}

TEST_CASE("constant observable has zero error") {
  Problem p(2, 2, 0.1);
  auto est = run_estimate(p.spec, scalar_observable([](EvalContext&) { return 1.0; }), 500, 10, 1);
  CHECK(est.mean[0] == 1.0);
  CHECK(est.se[0] == 0.0);
  CHECK_THROWS_AS(run_estimate(p.spec, first_coordinate(), 0, 0, 1), std::invalid_argument);
}

TEST_CASE("prior mean of u_1 under a flat likelihood") {
  Problem p(2, 2, 1e6);
  std::vector<double> Ms{1000, 4000, 16000}, ses;
  for (double M : Ms) {
    auto est = run_estimate(p.spec, first_coordinate(), static_cast<std::size_t>(M), 0, 21);
    CHECK(std::abs(est.mean[0]) < 3.0 * est.se[0]);
    ses.push_back(est.se[0]);
  }
  CHECK(std::abs(fit_rate(Ms, ses).slope + 0.5) < 0.1);
}

TEST_CASE("posterior mean agrees with the quadrature oracle") {
  Problem p(2, 4, 0.1);
  auto g = qoi_of(*p.spec.model);
  auto oracle = posterior_expectation_quadrature(p.spec, g, QuadratureGrid(2, 16));
  auto est = run_estimate(p.spec, g, 20000, 0, 5);
  CHECK(std::abs(est.mean[0] - oracle.mean[0]) < 3.0 * est.se[0]);
}

TEST_CASE("transition flux is symmetric at J = 1") {
  Problem p(1, 3, 0.1);
  ChainRun chain(p.spec, first_coordinate(), {.dimension = 1, .seed = 17, .keep_states = true});
  chain.run(40000);
  auto s = chain.state_trace();
  double flux[4][4] = {};
  auto bin = [](double x) { return std::min(3, static_cast<int>((x + 1.0) * 2.0)); };
  for (std::size_t i = 1; i < s.size(); ++i) flux[bin(s[i - 1])][bin(s[i])] += 1.0;
  for (int a = 0; a < 4; ++a) {
    for (int b = a + 1; b < 4; ++b) {
      const double total = flux[a][b] + flux[b][a];
      CHECK(total > 100.0);
      CHECK(std::abs(flux[a][b] - flux[b][a]) < 4.0 * std::sqrt(total));
    }
  }
}

TEST_CASE("replica chains are uncorrelated") {
  Problem p(2, 2, 0.1);
  const std::size_t replicas = 64;
  std::vector<double> x, y;
  for (std::size_t r = 0; r < replicas; ++r) {
    auto a = run_estimate(p.spec, first_coordinate(), 200, 0, 1, 2 * r);
    auto b = run_estimate(p.spec, first_coordinate(), 200, 0, 1, 2 * r + 1);
    x.push_back(a.mean[0]);
    y.push_back(b.mean[0]);
  }
  CHECK(std::abs(correlation(x, y)) < 4.0 / std::sqrt(static_cast<double>(replicas)));
}

TEST_CASE("burn-in steps are not retained") {
  Problem p(2, 2, 0.1);
  ChainRun chain(p.spec, first_coordinate(), {.dimension = 2, .seed = 1, .burn_in = 30});
  chain.run(100);
  CHECK(chain.steps() == 100);
  CHECK(chain.retained() == 70);
  CHECK(chain.trace().size() == 70);
}

TEST_CASE("batch means") {
  std::vector<double> x(100);
  std::iota(x.begin(), x.end(), 0.0);
  auto bm = batch_means(x);
  CHECK(bm.batches == 10);
  CHECK(bm.batch_size == 10);
  CHECK(bm.mean == doctest::Approx(49.5));
  // batch means 4.5, 14.5, ..., 94.5: variance 916.67, se = sqrt(10 * 916.67 / 100)
  CHECK(bm.se == doctest::Approx(std::sqrt(10.0 * 8250.0 / 9.0 / 100.0)));
  CHECK(std::isnan(batch_means(std::vector<double>{1.0}).se));
  std::vector<double> trace{1, 10, 2, 20, 3, 30, 4, 40};
  CHECK(batch_means(trace, 2, 1).mean == doctest::Approx(25.0));
  CHECK_THROWS_AS(batch_means(trace, 2, 2), std::invalid_argument);
}

TEST_CASE("solver failures surface with the step index") {
  PotentialFn bad = [](EvalContext& ctx) -> double {
    if (ctx.u()[0] > 0.9) throw std::runtime_error("boom");
    return 0.0;
  };
  bool caught = false;
  try {
    ChainRun c(bad, first_coordinate(), {.dimension = 1, .seed = 1});
    c.run(1000);
  } catch (const ChainFailure& e) {
    caught = true;
    CHECK(e.step() <= 1000);
    CHECK(std::string(e.what()).find("boom") != std::string::npos);
  }
  CHECK(caught);
}
