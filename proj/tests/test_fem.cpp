#include <cmath>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "invert/fem.hpp"
#include "invert/oracle.hpp"
#include "invert/quadrature.hpp"
#include "invert/stats.hpp"

using namespace invert;

namespace {

constexpr double pi = std::numbers::pi;

double one(Point) { return 1.0; }

// P1 stiffness for K = 1 built triangle by triangle from vertex coordinates.
std::vector<std::vector<double>> dense_laplacian_2d(const FemLevel& lvl) {
  const std::size_t n = lvl.n_dof();
  const std::size_t c = lvl.cells_per_side();
  const double h = lvl.h();
  auto dof_of = [&](std::size_t i, std::size_t j) -> long {
    if (i == 0 || j == 0 || i == c || j == c) return -1;
    for (std::size_t d = 0; d < n; ++d) {
      Point p = lvl.dof_point(d);
      if (std::abs(p.x - i * h) < 1e-12 && std::abs(p.y - j * h) < 1e-12) return static_cast<long>(d);
    }
    return -2;
  };
  std::vector<std::vector<double>> a(n, std::vector<double>(n, 0.0));
  auto add_triangle = [&](std::array<std::pair<std::size_t, std::size_t>, 3> v) {
    double x[3], y[3];
    for (int k = 0; k < 3; ++k) {
      x[k] = v[k].first * h;
      y[k] = v[k].second * h;
    }
    const double det = (x[1] - x[0]) * (y[2] - y[0]) - (x[2] - x[0]) * (y[1] - y[0]);
    double gx[3], gy[3];
    for (int k = 0; k < 3; ++k) {
      const int a1 = (k + 1) % 3, a2 = (k + 2) % 3;
      gx[k] = (y[a1] - y[a2]) / det;
      gy[k] = (x[a2] - x[a1]) / det;
    }
    const double area = std::abs(det) / 2.0;
    for (int p = 0; p < 3; ++p) {
      for (int q = 0; q < 3; ++q) {
        long dp = dof_of(v[p].first, v[p].second), dq = dof_of(v[q].first, v[q].second);
        if (dp < 0 || dq < 0) continue;
        a[dp][dq] += area * (gx[p] * gx[q] + gy[p] * gy[q]);
      }
    }
  };
  for (std::size_t i = 0; i < c; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      add_triangle({{{i, j}, {i + 1, j}, {i + 1, j + 1}}});
      add_triangle({{{i, j}, {i + 1, j + 1}, {i, j + 1}}});
    }
  }
  return a;
}

// integral of w * P_h with P_h the piecewise linear interpolant of nodal values (1D).
double integrate_1d(const FemLevel& lvl, std::span<const double> nodal, const ScalarFunction& w) {
  const auto rule = gauss_legendre(10);
  const std::size_t c = lvl.cells_per_side();
  const double h = lvl.h();
  double s = 0.0;
  for (std::size_t e = 0; e < c; ++e) {
    const double left = e == 0 ? 0.0 : nodal[e - 1];
    const double right = e + 1 == c ? 0.0 : nodal[e];
    for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
      const double t = 0.5 * (rule.nodes[q] + 1.0);
      const double x = (e + t) * h;
      s += 0.5 * h * rule.weights[q] * w({x, 0.0}) * ((1.0 - t) * left + t * right);
    }
  }
  return s;
}

}  // namespace

TEST_CASE("mesh sizes") {
  FemLevel a(1, 0), b(1, 3), c(2, 2);
  CHECK(a.h() == 0.5);
  CHECK(a.n_dof() == 1);
  CHECK(b.h() == 1.0 / 16.0);
  CHECK(b.n_dof() == 15);
  CHECK(c.n_dof() == 49);
  CHECK(c.n_elements() == 128);
  CHECK_THROWS_AS(FemLevel(3, 1), std::invalid_argument);
  CHECK_THROWS_AS(FemLevel(1, -1), std::invalid_argument);
}

TEST_CASE("1D Laplacian is tridiag(-1/h, 2/h, -1/h)") {
  FemLevel lvl(1, 1);
  const auto& a = lvl.laplacian();
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(a.at(i, i) == doctest::Approx(8.0));
    if (i > 0) CHECK(a.at(i, i - 1) == doctest::Approx(-4.0));
    if (i + 1 < 3) CHECK(a.at(i, i + 1) == doctest::Approx(-4.0));
  }
  CHECK(a.at(0, 2) == 0.0);
  for (double v : lvl.integrate_basis(one)) CHECK(v == doctest::Approx(0.25).epsilon(1e-14));
}

TEST_CASE("2D Laplacian matches a dense element-by-element assembly") {
  for (int l : {0, 1, 2}) {
    FemLevel lvl(2, l);
    auto dense = dense_laplacian_2d(lvl);
    const auto& a = lvl.laplacian();
    double worst = 0.0;
    for (std::size_t i = 0; i < lvl.n_dof(); ++i) {
      for (std::size_t j = 0; j < lvl.n_dof(); ++j) worst = std::max(worst, std::abs(a.at(i, j) - dense[i][j]));
    }
    CHECK(worst < 1e-12);
  }
  CHECK(FemLevel(2, 0).laplacian().at(0, 0) == doctest::Approx(4.0));
}

TEST_CASE("assembled variable coefficient matches the Laplacian for K = 1") {
  auto field = builtin_field(2, 2.0, 1.0, 4);
  FemLevel lvl(2, 2);
  std::vector<double> u(4, 0.0);
  auto sys = assemble(lvl, field, u, one);
  for (std::size_t i = 0; i < sys.matrix.nnz(); ++i) CHECK(sys.matrix.val[i] == doctest::Approx(lvl.laplacian().val[i]));
}

TEST_CASE("P1 is nodally exact for -P'' = 1") {
  auto field = builtin_field(1, 2.0, 1.0, 1);
  std::vector<double> u{0.0};
  for (int l : {2, 5}) {
    FemLevel lvl(1, l);
    auto sol = solve(lvl, field, u, one, 1e-14);
    for (std::size_t i = 0; i < lvl.n_dof(); ++i) {
      const double x = lvl.dof_point(i).x;
      CHECK(std::abs(sol.nodal[i] - x * (1.0 - x) / 2.0) < 1e-12);
    }
    ObservationSet whole({one});
    const double mean = observe(sol, whole)[0];
    CHECK(std::abs(mean - 1.0 / 12.0) <= lvl.h() * lvl.h());
  }
}

TEST_CASE("zero load gives zero solution without iterations") {
  auto field = builtin_field(1, 2.0, 1.0, 2);
  FemLevel lvl(1, 4);
  std::vector<double> u{0.3, -0.2};
  auto sol = solve(lvl, field, u, [](Point) { return 0.0; }, 1e-10);
  CHECK(sol.iterations == 0);
  for (double v : sol.nodal) CHECK(v == 0.0);
  auto obs = observe(sol, ObservationSet::mollified_indicators(1, 4));
  for (double v : obs) CHECK(v == 0.0);
}

TEST_CASE("PCG agrees with the dense LU oracle") {
  auto field = builtin_field(1, 2.0, 1.0, 1);
  FemLevel lvl(1, 6);
  std::vector<double> u{0.7};
  auto sol = solve(lvl, field, u, one, 1e-14);
  auto dense = dense_reference_solve(lvl, field, u, one);
  double worst = 0.0;
  for (std::size_t i = 0; i < dense.size(); ++i) worst = std::max(worst, std::abs(sol.nodal[i] - dense[i]));
  CHECK(worst < 1e-10);
}

TEST_CASE("observation functionals match quadrature of the dense solution") {
  auto field = builtin_field(1, 2.0, 1.0, 4);
  FemLevel lvl(1, 5);
  std::vector<double> u{0.4, -0.9, 0.1, 0.6};
  ScalarFunction w1 = [](Point p) { return std::sin(pi * p.x); };
  ScalarFunction w2 = [](Point p) { return p.x < 0.5 ? 4.0 * p.x : 0.0; };
  ObservationSet obs({w1, w2});
  auto sol = solve(lvl, field, u, one, 1e-14);
  auto got = observe(sol, obs);
  auto dense = dense_reference_solve(lvl, field, u, one);
  CHECK(std::abs(got[0] - integrate_1d(lvl, dense, w1)) < 1e-8);
  CHECK(std::abs(got[1] - integrate_1d(lvl, dense, w2)) < 1e-8);
}

TEST_CASE("mollified indicators have unit mass") {
  for (int dim : {1, 2}) {
    auto obs = ObservationSet::mollified_indicators(dim, 4);
    FemLevel lvl(dim, dim == 1 ? 8 : 5);
    auto reps = obs.representers(lvl);
    for (const auto& r : reps) {
      double mass = 0.0;
      for (double v : r) mass += v;
      CHECK(mass == doctest::Approx(1.0).epsilon(1e-3));
    }
  }
  CHECK_THROWS_AS(ObservationSet::mollified_indicators(2, 3), std::invalid_argument);
  CHECK_THROWS_AS(ObservationSet::mollified_indicators(1, 0), std::invalid_argument);
}

TEST_CASE("H1 error of identical solutions is zero") {
  auto field = builtin_field(1, 2.0, 1.0, 2);
  FemLevel lvl(1, 4);
  std::vector<double> u{0.5, 0.5};
  auto a = solve(lvl, field, u, one, 1e-12);
  CHECK(h1_seminorm_error(a, a) == 0.0);
}

TEST_CASE("manufactured solution converges at rate one in H1") {
  auto field1 = builtin_field(1, 2.0, 1.0, 1);
  std::vector<double> u{0.0};
  std::vector<double> ls, errs;
  for (int l = 2; l <= 7; ++l) {
    FemLevel lvl(1, l);
    auto sol = solve(lvl, field1, u, [](Point p) { return pi * pi * std::sin(pi * p.x); }, 1e-14);
    errs.push_back(h1_seminorm_error(sol, [](Point p) { return Point{pi * std::cos(pi * p.x), 0.0}; }));
    ls.push_back(l);
  }
  auto fit = fit_rate_log2x(ls, errs);
  CHECK(fit.slope < -0.9);
  CHECK(fit.slope > -1.1);

  auto field2 = builtin_field(2, 2.0, 1.0, 1);
  ls.clear();
  errs.clear();
  for (int l = 2; l <= 5; ++l) {
    FemLevel lvl(2, l);
    auto sol = solve(lvl, field2, u, [](Point p) { return 2 * pi * pi * std::sin(pi * p.x) * std::sin(pi * p.y); },
                     1e-14);
    errs.push_back(h1_seminorm_error(sol, [](Point p) {
      return Point{pi * std::cos(pi * p.x) * std::sin(pi * p.y), pi * std::sin(pi * p.x) * std::cos(pi * p.y)};
    }));
    ls.push_back(l);
  }
  fit = fit_rate_log2x(ls, errs);
  CHECK(fit.slope < -0.9);
  CHECK(fit.slope > -1.1);
}

TEST_CASE("truncation error is bounded by the coefficient tail") {
  auto field = builtin_field(1, 2.0, 1.0, 64);
  FemLevel lvl(1, 8);
  std::vector<double> u(64, 1.0);
  auto ref = solve(lvl, field, u, one, 1e-13);
  // |P^J - P|_V <= |f|_{V*} |K - K^J|_inf / K_min^2 and |1|_{V*} <= 1/pi
  for (std::size_t J : {2, 4, 8, 16}) {
    auto sol = solve(lvl, field, std::span<const double>(u.data(), J), one, 1e-13);
    const double bound = field.truncation_tail(J) / (pi * field.k_min() * field.k_min());
    CHECK(h1_seminorm_error(sol, ref) <= bound);
  }
}

TEST_CASE("prolongation keeps coarse nodal values") {
  FemLevel coarse(1, 2), fine(1, 4);
  std::vector<double> c(coarse.n_dof());
  for (std::size_t i = 0; i < c.size(); ++i) {
    const double x = coarse.dof_point(i).x;
    c[i] = x * (1.0 - x);
  }
  auto f = prolongate(1, 2, 4, c);
  REQUIRE(f.size() == fine.n_dof());
  for (std::size_t i = 0; i + 3 < f.size(); i += 4) {
    const double x = fine.dof_point(i + 3).x;
    CHECK(f[i + 3] == doctest::Approx(x * (1.0 - x)));
  }
  CHECK_THROWS_AS(prolongate(1, 4, 2, c), std::invalid_argument);
  CHECK_THROWS_AS(prolongate(1, 1, 2, c), std::invalid_argument);
}

TEST_CASE("PCG reports failure at the iteration cap") {
  FemLevel lvl(1, 6);
  std::vector<double> b(lvl.n_dof(), 1.0);
  CHECK_THROWS_AS(pcg_sgs(lvl.laplacian(), b, 1e-14, 2), SolverFailure);
  try {
    pcg_sgs(lvl.laplacian(), b, 1e-14, 2);
  } catch (const SolverFailure& e) {
    CHECK(e.residual_history().size() >= 2);
  }
}

TEST_CASE("work tally counts one solve per call") {
  auto field = builtin_field(1, 2.0, 1.0, 2);
  FemLevel lvl(1, 3);
  std::vector<double> u{0.1, 0.2};
  auto sol = solve(lvl, field, u, one, 1e-10);
  CHECK(sol.work.solves == 1);
  CHECK(sol.work.ndof == lvl.n_dof());
  CHECK(sol.work.flops > 0.0);
}
