#include <algorithm>
#include <cmath>
#include <memory>
#include <vector>

#include "doctest.h"
#include "invert/bayes.hpp"
#include "invert/mlmcmc.hpp"
#include "invert/oracle.hpp"
#include "invert/sampler.hpp"
#include "invert/stats.hpp"

using namespace invert;

namespace {

struct Toy {
  ModelFamily family;
  MlmcmcProblem problem;

  explicit Toy(int dim = 1) : family(setup(dim)) {
    const std::vector<double> u_true{0.5, -0.5, 0.25, -0.25};
    auto noise = NoiseModel::isotropic(4, 0.1);
    auto data = synthesize_data(family.forward(4, dim == 1 ? 8 : 5), u_true, noise, 1);
    problem = {&family, std::make_shared<const Likelihood>(Likelihood{data, noise})};
  }

  static ProblemSetup setup(int dim) {
    ProblemSetup p;
    p.dim = dim;
    p.n_modes = 4;
    return p;
  }
};

}  // namespace

TEST_CASE("schedule sizes") {
  auto s4 = make_schedule(4, 1.0, 1);
  CHECK(s4.M(1, 1) == 16);
  CHECK(s4.M(0, 0) == 256);
  CHECK(s4.M(4, 0) == 1);
  CHECK(s4.l_prime_max[3] == 1);
  CHECK(s4.n_terms() == 15);
  auto s3 = make_schedule(3, 1.0, 1);
  CHECK(s3.J == std::vector<std::size_t>{1, 2, 4, 8});
  CHECK(s3.dimension() == 8);
  auto s3q = make_schedule(3, 2.0, 1);
  CHECK(s3q.J == std::vector<std::size_t>{1, 2, 2, 4});
  auto capped = make_schedule(3, 1.0, 1, 2);
  CHECK(capped.J == std::vector<std::size_t>{1, 2, 2, 2});
  auto rect = make_schedule(2, 1.0, 1, 4, true);
  CHECK(rect.n_terms() == 9);
  CHECK_THROWS_AS(make_schedule(-1, 1.0, 1), std::invalid_argument);
  CHECK_THROWS_AS(make_schedule(2, 0.0, 1), std::invalid_argument);
}

TEST_CASE("stream ids are distinct across terms, roles and replicas") {
  std::vector<std::uint64_t> ids;
  for (std::size_t r = 0; r < 3; ++r) {
    for (int l = 0; l <= 6; ++l) {
      for (int lp = 0; lp <= 6; ++lp) {
        for (int role = 0; role < 2; ++role) ids.push_back(MlmcmcSchedule::stream(r, l, lp, role));
      }
    }
  }
  std::sort(ids.begin(), ids.end());
  CHECK(std::adjacent_find(ids.begin(), ids.end()) == ids.end());
}

TEST_CASE("(0,0) term is a plain chain at level 0") {
  Toy toy;
  auto sched = make_schedule(2, 1.0, 7, 4);
  auto t = level_difference_term(toy.problem, sched, 0, 0);
  const auto& m0 = toy.problem.model(sched, 0);
  PotentialFn phi = [&](EvalContext& ctx) { return toy.problem.likelihood->potential(ctx.at(m0)); };
  auto plain = run_estimate(phi, sched.dimension(), qoi_of(m0), sched.M(0, 0), 0, 7, MlmcmcSchedule::stream(0, 0, 0, 0));
  CHECK(t.contribution == plain.mean[0]);
  CHECK(t.B == 0.0);
  CHECK(t.C == 0.0);
}

TEST_CASE("L = 0 reduces to a single plain estimate") {
  Toy toy;
  auto sched = make_schedule(0, 1.0, 3);
  auto res = estimate(toy.problem, sched);
  REQUIRE(res.terms.size() == 1);
  CHECK(res.estimate == res.terms[0].contribution);
  CHECK(res.work.solves == sched.M(0, 0) + 1);
}

TEST_CASE("identical adjacent potentials give a zero term") {
  Toy toy;
  auto sched = make_schedule(2, 1.0, 1, 4);
  sched.J[1] = sched.J[0];
  sched.mesh_level[1] = sched.mesh_level[0];
  auto t = level_difference_term(toy.problem, sched, 1, 0, 0, 64);
  CHECK(t.A == 0.0);
  CHECK(t.B == 0.0);
  CHECK(t.C != 0.0);
  CHECK(t.contribution == 0.0);
  CHECK(t.max_abs_delta_phi == 0.0);
}

TEST_CASE("term contribution is A + B C") {
  Toy toy;
  auto sched = make_schedule(2, 1.0, 5, 4);
  auto t = level_difference_term(toy.problem, sched, 1, 1);
  CHECK(t.contribution == doctest::Approx(t.A + t.B * t.C).epsilon(1e-15));
  CHECK(t.M == 1);
  CHECK_THROWS_AS(level_difference_term(toy.problem, sched, 2, 1), std::invalid_argument);
}

TEST_CASE("replicated estimate agrees with the oracle at L = 2") {
  Toy toy;
  const std::size_t R = 16;
  std::vector<double> values;
  auto sched = make_schedule(2, 1.0, 11, 2);
  sched.sample_scale = 16.0;
  for (std::size_t r = 0; r < R; ++r) values.push_back(estimate(toy.problem, sched, r).estimate);
  const double oracle = quadrature_level_expectation(toy.problem, sched, 2, 2, 16);
  const double se = std::sqrt(variance(values) / static_cast<double>(R));
  CHECK(std::abs(mean(values) - oracle) < 3.0 * se);
}

TEST_CASE("quadrature telescoping over the full rectangle is exact") {
  Toy toy;
  for (int L : {1, 2}) {
    auto sched = make_schedule(L, 1.0, 1, 2, true);
    auto ex = quadrature_terms(toy.problem, sched, 16);
    const double direct = quadrature_level_expectation(toy.problem, sched, L, L, 16);
    CHECK(std::abs(ex.sum - direct) < 1e-8);
    for (const auto& t : ex.terms) CHECK(t.contribution == doctest::Approx(t.A + t.B * t.C));
  }
}

TEST_CASE("estimate is independent of the execution mode") {
  Toy toy;
  auto sched = make_schedule(3, 1.0, 2, 4);
  auto a = estimate(toy.problem, sched, 1, Execution::serial);
  auto b = estimate(toy.problem, sched, 1, Execution::parallel);
  CHECK(a.estimate == b.estimate);
  CHECK(a.work.flops == b.work.flops);
  double sum = 0.0;
  Work w;
  for (const auto& t : a.terms) {
    sum += t.contribution;
    w += t.work;
  }
  CHECK(a.estimate == sum);
  CHECK(a.work.solves == w.solves);
  CHECK(a.work.ndof == w.ndof);
}

TEST_CASE("2D work grows like L 4^L") {
  Toy toy(2);
  std::vector<double> Ls, ndof, shape, ratio;
  for (int L = 1; L <= 4; ++L) {
    auto sched = make_schedule(L, 1.0, 1, 4);
    auto res = estimate(toy.problem, sched);
    Ls.push_back(L);
    ndof.push_back(static_cast<double>(res.work.ndof));
    shape.push_back(L * std::pow(4.0, L));
    ratio.push_back(static_cast<double>(res.work.ndof) / shape.back());
  }
  CHECK(std::abs(fit_rate_log2x(Ls, ndof).slope - fit_rate_log2x(Ls, shape).slope) < 0.3);
  CHECK(*std::max_element(ratio.begin(), ratio.end()) <= 3.0 * *std::min_element(ratio.begin(), ratio.end()));
}
