#include "invert/fem.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

namespace invert {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

struct RulePoint {
  std::array<double, 3> bary;  // 1D rules use the first two entries
  double weight;               // relative to the element measure
};

// 3-point Gauss-Legendre on an interval (degree 5).
const std::vector<RulePoint>& interval_rule() {
  static const std::vector<RulePoint> rule = [] {
    const double g = std::sqrt(3.0 / 5.0) / 2.0;
    return std::vector<RulePoint>{{{0.5 + g, 0.5 - g, 0.0}, 5.0 / 18.0},
                                  {{0.5, 0.5, 0.0}, 8.0 / 18.0},
                                  {{0.5 - g, 0.5 + g, 0.0}, 5.0 / 18.0}};
  }();
  return rule;
}

// 6-point degree-4 rule on a triangle (Dunavant).
const std::vector<RulePoint>& triangle_rule() {
  static const std::vector<RulePoint> rule = [] {
    const double a1 = 0.445948490915965, b1 = 0.108103018168070, w1 = 0.223381589678011;
    const double a2 = 0.091576213509771, b2 = 0.816847572980459, w2 = 0.109951743655322;
    return std::vector<RulePoint>{{{a1, a1, b1}, w1}, {{a1, b1, a1}, w1}, {{b1, a1, a1}, w1},
                                  {{a2, a2, b2}, w2}, {{a2, b2, a2}, w2}, {{b2, a2, a2}, w2}};
  }();
  return rule;
}

// Three-point interior rule used for the variable coefficient in 2D.
constexpr std::array<std::array<double, 3>, 3> kCoefBary{{{2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0},
                                                         {1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0},
                                                         {1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0}}};

template <typename Vertices>
Point barycentric_point(const Vertices& v, const std::array<double, 3>& b, int n) {
  Point p;
  for (int a = 0; a < n; ++a) {
    p.x += b[a] * v[a].x;
    p.y += b[a] * v[a].y;
  }
  return p;
}

}  // namespace

void CsrMatrix::multiply(std::span<const double> x, std::span<double> y) const {
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t k = row_ptr[i]; k < row_ptr[i + 1]; ++k) s += val[k] * x[col[k]];
    y[i] = s;
  }
}

double CsrMatrix::at(std::size_t i, std::size_t j) const {
  const auto first = col.begin() + static_cast<std::ptrdiff_t>(row_ptr[i]);
  const auto last = col.begin() + static_cast<std::ptrdiff_t>(row_ptr[i + 1]);
  const auto it = std::lower_bound(first, last, j);
  if (it == last || *it != j) return 0.0;
  return val[static_cast<std::size_t>(it - col.begin())];
}

FemLevel::FemLevel(int dim, int level) : dim_(dim), level_(level) {
  if (dim != 1 && dim != 2) throw std::invalid_argument("FemLevel: dim must be 1 or 2");
  if (level < 0 || level > 20) throw std::invalid_argument("FemLevel: level out of range");
  cells_ = std::size_t{2} << level;  // h_0 = 1/2
  h_ = 1.0 / static_cast<double>(cells_);
  n_dof_ = dim == 1 ? cells_ - 1 : (cells_ - 1) * (cells_ - 1);
  build_mesh();
  build_pattern();
}

long FemLevel::interior_dof(std::size_t i, std::size_t j) const {
  if (dim_ == 1) return (i == 0 || i == cells_) ? -1 : static_cast<long>(i - 1);
  if (i == 0 || j == 0 || i == cells_ || j == cells_) return -1;
  return static_cast<long>((j - 1) * (cells_ - 1) + (i - 1));
}

Point FemLevel::dof_point(std::size_t dof) const {
  if (dim_ == 1) return {static_cast<double>(dof + 1) * h_, 0.0};
  const std::size_t m = cells_ - 1;
  return {static_cast<double>(dof % m + 1) * h_, static_cast<double>(dof / m + 1) * h_};
}

void FemLevel::build_mesh() {
  if (dim_ == 1) {
    n_elements_ = cells_;
    elements_.resize(n_elements_);
    for (std::size_t e = 0; e < cells_; ++e) {
      Element& el = elements_[e];
      el.n_vertices = 2;
      el.vertex[0] = {static_cast<double>(e) * h_, 0.0};
      el.vertex[1] = {static_cast<double>(e + 1) * h_, 0.0};
      el.dof[0] = interior_dof(e, 0);
      el.dof[1] = interior_dof(e + 1, 0);
      el.measure = h_;
      el.grad[0] = {-1.0 / h_, 0.0};
      el.grad[1] = {1.0 / h_, 0.0};
      coef_points_.push_back({(static_cast<double>(e) + 0.5) * h_, 0.0});
    }
    return;
  }

  n_elements_ = 2 * cells_ * cells_;
  elements_.reserve(n_elements_);
  for (std::size_t j = 0; j < cells_; ++j) {
    for (std::size_t i = 0; i < cells_; ++i) {
      const std::array<std::array<std::size_t, 2>, 2> corner_sets[2] = {
          {{{i + 1, j}, {i + 1, j + 1}}}, {{{i + 1, j + 1}, {i, j + 1}}}};
      for (const auto& rest : corner_sets) {
        Element el;
        el.n_vertices = 3;
        const std::array<std::array<std::size_t, 2>, 3> ids{{{i, j}, rest[0], rest[1]}};
        for (int a = 0; a < 3; ++a) {
          el.vertex[a] = {static_cast<double>(ids[a][0]) * h_, static_cast<double>(ids[a][1]) * h_};
          el.dof[a] = interior_dof(ids[a][0], ids[a][1]);
        }
        const Point& p0 = el.vertex[0];
        const Point& p1 = el.vertex[1];
        const Point& p2 = el.vertex[2];
        const double area2 = (p1.x - p0.x) * (p2.y - p0.y) - (p2.x - p0.x) * (p1.y - p0.y);
        el.measure = 0.5 * std::abs(area2);
        el.grad[0] = {(p1.y - p2.y) / area2, (p2.x - p1.x) / area2};
        el.grad[1] = {(p2.y - p0.y) / area2, (p0.x - p2.x) / area2};
        el.grad[2] = {(p0.y - p1.y) / area2, (p1.x - p0.x) / area2};
        for (const auto& b : kCoefBary) coef_points_.push_back(barycentric_point(el.vertex, b, 3));
        elements_.push_back(el);
      }
    }
  }
}

void FemLevel::build_pattern() {
  std::vector<std::vector<std::size_t>> rows(n_dof_);
  for (const Element& el : elements_) {
    for (int a = 0; a < el.n_vertices; ++a) {
      if (el.dof[a] < 0) continue;
      for (int b = 0; b < el.n_vertices; ++b) {
        if (el.dof[b] >= 0) rows[static_cast<std::size_t>(el.dof[a])].push_back(static_cast<std::size_t>(el.dof[b]));
      }
    }
  }
  pattern_.n = n_dof_;
  pattern_.row_ptr.assign(n_dof_ + 1, 0);
  for (std::size_t r = 0; r < n_dof_; ++r) {
    auto& row = rows[r];
    std::sort(row.begin(), row.end());
    row.erase(std::unique(row.begin(), row.end()), row.end());
    pattern_.row_ptr[r + 1] = pattern_.row_ptr[r] + row.size();
    for (std::size_t c : row) {
      if (c == r) pattern_.diag.push_back(pattern_.col.size());
      pattern_.col.push_back(c);
    }
  }
  pattern_.val.assign(pattern_.col.size(), 0.0);

  for (std::size_t e = 0; e < elements_.size(); ++e) {
    const Element& el = elements_[e];
    for (int a = 0; a < el.n_vertices; ++a) {
      if (el.dof[a] < 0) continue;
      const auto row = static_cast<std::size_t>(el.dof[a]);
      for (int b = 0; b < el.n_vertices; ++b) {
        if (el.dof[b] < 0) continue;
        const auto first = pattern_.col.begin() + static_cast<std::ptrdiff_t>(pattern_.row_ptr[row]);
        const auto last = pattern_.col.begin() + static_cast<std::ptrdiff_t>(pattern_.row_ptr[row + 1]);
        const auto slot = static_cast<std::uint32_t>(std::lower_bound(first, last, static_cast<std::size_t>(el.dof[b])) -
                                                     pattern_.col.begin());
        const double coef = el.measure * (el.grad[a].x * el.grad[b].x + el.grad[a].y * el.grad[b].y);
        scatter_.push_back({static_cast<std::uint32_t>(e), slot, coef});
      }
    }
  }

  laplacian_ = pattern_;
  std::vector<double> ones(coef_points_.size(), 1.0);
  assemble_stiffness(ones, laplacian_.val);
}

void FemLevel::assemble_stiffness(std::span<const double> k_at_points, std::span<double> values) const {
  std::fill(values.begin(), values.end(), 0.0);
  const std::size_t ppe = points_per_element();
  const double inv = 1.0 / static_cast<double>(ppe);
  std::size_t current = static_cast<std::size_t>(-1);
  double kavg = 0.0;
  for (const Scatter& s : scatter_) {
    if (s.element != current) {
      current = s.element;
      kavg = 0.0;
      for (std::size_t q = 0; q < ppe; ++q) kavg += k_at_points[current * ppe + q];
      kavg *= inv;
    }
    values[s.slot] += kavg * s.coef;
  }
}

std::vector<double> FemLevel::integrate_basis(const ScalarFunction& w) const {
  std::vector<double> out(n_dof_, 0.0);
  const auto& rule = dim_ == 1 ? interval_rule() : triangle_rule();
  for (const Element& el : elements_) {
    for (const RulePoint& rp : rule) {
      const Point p = barycentric_point(el.vertex, rp.bary, el.n_vertices);
      const double wv = w(p) * rp.weight * el.measure;
      for (int a = 0; a < el.n_vertices; ++a) {
        if (el.dof[a] >= 0) out[static_cast<std::size_t>(el.dof[a])] += wv * rp.bary[a];
      }
    }
  }
  return out;
}

double FemLevel::energy_norm(std::span<const double> v) const {
  std::vector<double> lv(n_dof_);
  laplacian_.multiply(v, lv);
  return std::sqrt(std::max(0.0, dot(v, lv)));
}

double FemLevel::h1_error(std::span<const double> v, const std::function<Point(Point)>& exact_grad) const {
  const auto& rule = dim_ == 1 ? interval_rule() : triangle_rule();
  double sum = 0.0;
  for (const Element& el : elements_) {
    Point gh;
    for (int a = 0; a < el.n_vertices; ++a) {
      if (el.dof[a] < 0) continue;
      const double va = v[static_cast<std::size_t>(el.dof[a])];
      gh.x += va * el.grad[a].x;
      gh.y += va * el.grad[a].y;
    }
    for (const RulePoint& rp : rule) {
      const Point g = exact_grad(barycentric_point(el.vertex, rp.bary, el.n_vertices));
      const double dx = gh.x - g.x;
      const double dy = gh.y - g.y;
      sum += rp.weight * el.measure * (dx * dx + dy * dy);
    }
  }
  return std::sqrt(sum);
}

std::vector<double> FemLevel::prolongate_from_coarser(std::span<const double> coarse) const {
  if (level_ == 0) throw std::invalid_argument("prolongate: level 0 has no coarser mesh");
  const std::size_t cc = cells_ / 2;
  if (dim_ == 1) {
    if (coarse.size() != cc - 1) throw std::invalid_argument("prolongate: size mismatch");
    auto cval = [&](std::size_t i) { return (i == 0 || i == cc) ? 0.0 : coarse[i - 1]; };
    std::vector<double> fine(n_dof_);
    for (std::size_t i = 1; i < cells_; ++i) {
      fine[i - 1] = (i % 2 == 0) ? cval(i / 2) : 0.5 * (cval((i - 1) / 2) + cval((i + 1) / 2));
    }
    return fine;
  }
  if (coarse.size() != (cc - 1) * (cc - 1)) throw std::invalid_argument("prolongate: size mismatch");
  auto cval = [&](std::size_t i, std::size_t j) {
    if (i == 0 || j == 0 || i == cc || j == cc) return 0.0;
    return coarse[(j - 1) * (cc - 1) + (i - 1)];
  };
  std::vector<double> fine(n_dof_);
  for (std::size_t j = 1; j < cells_; ++j) {
    for (std::size_t i = 1; i < cells_; ++i) {
      double value;
      const bool ie = i % 2 == 0;
      const bool je = j % 2 == 0;
      if (ie && je) {
        value = cval(i / 2, j / 2);
      } else if (!ie && je) {
        value = 0.5 * (cval((i - 1) / 2, j / 2) + cval((i + 1) / 2, j / 2));
      } else if (ie && !je) {
        value = 0.5 * (cval(i / 2, (j - 1) / 2) + cval(i / 2, (j + 1) / 2));
      } else {
        // Midpoint of the coarse (0,0)-(1,1) diagonal.
        value = 0.5 * (cval((i - 1) / 2, (j - 1) / 2) + cval((i + 1) / 2, (j + 1) / 2));
      }
      fine[(j - 1) * (cells_ - 1) + (i - 1)] = value;
    }
  }
  return fine;
}

CoefficientTable::CoefficientTable(const FemLevel& level, const CoefficientField& field, std::size_t J) : J_(J) {
  if (J > field.n_modes()) throw std::invalid_argument("CoefficientTable: truncation exceeds the field's modes");
  if (field.dim() != level.dim()) throw std::invalid_argument("CoefficientTable: dimension mismatch");
  const auto pts = level.coefficient_points();
  kbar_.reserve(pts.size());
  for (const Point& p : pts) kbar_.push_back(field.kbar(p));
  modes_.resize(J * pts.size());
  for (std::size_t j = 0; j < J; ++j) {
    for (std::size_t q = 0; q < pts.size(); ++q) modes_[j * pts.size() + q] = field.mode(j, pts[q]);
  }
}

void CoefficientTable::evaluate(std::span<const double> u, std::span<double> k) const {
  if (u.size() < J_) throw std::invalid_argument("CoefficientTable: parameter shorter than truncation");
  const std::size_t n = kbar_.size();
  std::copy(kbar_.begin(), kbar_.end(), k.begin());
  for (std::size_t j = 0; j < J_; ++j) {
    const double uj = u[j];
    if (uj == 0.0) continue;
    const double* row = modes_.data() + j * n;
    for (std::size_t q = 0; q < n; ++q) k[q] += uj * row[q];
  }
}

CgResult pcg_sgs(const CsrMatrix& a, std::span<const double> b, double rel_tol, std::size_t max_iter) {
  const std::size_t n = a.n;
  CgResult res;
  res.x.assign(n, 0.0);
  const double bnorm = std::sqrt(dot(b, b));
  if (bnorm == 0.0) return res;

  std::vector<double> r(b.begin(), b.end());
  std::vector<double> z(n), p(n), ap(n);
  const double nnz = static_cast<double>(a.nnz());

  auto precondition = [&](const std::vector<double>& rhs, std::vector<double>& out) {
    // Forward sweep (D + L) w = rhs, then backward (D + U) out = D w.
    for (std::size_t i = 0; i < n; ++i) {
      double s = rhs[i];
      for (std::size_t k = a.row_ptr[i]; k < a.diag[i]; ++k) s -= a.val[k] * out[a.col[k]];
      out[i] = s / a.val[a.diag[i]];
    }
    for (std::size_t i = n; i-- > 0;) {
      double s = a.val[a.diag[i]] * out[i];
      for (std::size_t k = a.diag[i] + 1; k < a.row_ptr[i + 1]; ++k) s -= a.val[k] * out[a.col[k]];
      out[i] = s / a.val[a.diag[i]];
    }
  };

  std::vector<double> history;
  precondition(r, z);
  p = z;
  double rz = dot(r, z);
  const double target = rel_tol * bnorm;
  for (std::size_t it = 1; it <= max_iter; ++it) {
    a.multiply(p, ap);
    const double alpha = rz / dot(p, ap);
    for (std::size_t i = 0; i < n; ++i) {
      res.x[i] += alpha * p[i];
      r[i] -= alpha * ap[i];
    }
    const double rnorm = std::sqrt(dot(r, r));
    history.push_back(rnorm);
    res.iterations = it;
    res.residual_norm = rnorm;
    res.flops += 6.0 * nnz + 10.0 * static_cast<double>(n);
    if (rnorm <= target) return res;
    precondition(r, z);
    const double rz_new = dot(r, z);
    const double beta = rz_new / rz;
    rz = rz_new;
    for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
  }
  std::ostringstream msg;
  msg << "pcg_sgs: no convergence after " << max_iter << " iterations (relative residual "
      << res.residual_norm / bnorm << ", target " << rel_tol << ")";
  throw SolverFailure(msg.str(), std::move(history));
}

double default_cg_tolerance(int level, double factor) { return factor * std::ldexp(1.0, -level); }

AssembledSystem assemble(const FemLevel& level, const CoefficientField& field, std::span<const double> u,
                         const ScalarFunction& f) {
  const CoefficientTable table(level, field, u.size());
  std::vector<double> k(table.n_points());
  table.evaluate(u, k);
  for (std::size_t q = 0; q < k.size(); ++q) {
    if (!(k[q] > 0.0)) throw std::domain_error("assemble: non-positive coefficient at a quadrature point");
  }
  AssembledSystem sys;
  sys.matrix = level.pattern();
  level.assemble_stiffness(k, sys.matrix.val);
  sys.load = level.integrate_basis(f);
  sys.assembly_flops = static_cast<double>(u.size() * k.size()) + static_cast<double>(sys.matrix.nnz());
  return sys;
}

ForwardSolution solve(const FemLevel& level, const CoefficientField& field, std::span<const double> u,
                      const ScalarFunction& f, double tol) {
  AssembledSystem sys = assemble(level, field, u, f);
  CgResult cg = pcg_sgs(sys.matrix, sys.load, tol, 10 * level.n_dof() + 100);
  ForwardSolution sol;
  sol.level = &level;
  sol.nodal = std::move(cg.x);
  sol.iterations = cg.iterations;
  sol.residual_norm = cg.residual_norm;
  sol.work = {1, level.n_dof(), cg.flops + sys.assembly_flops};
  return sol;
}

ObservationSet::ObservationSet(std::vector<ScalarFunction> weights) : weights_(std::move(weights)) {
  if (weights_.empty()) throw std::invalid_argument("ObservationSet: need at least one functional");
}

ObservationSet ObservationSet::mollified_indicators(int dim, std::size_t k) {
  if (k == 0) throw std::invalid_argument("mollified_indicators: k must be positive");
  // Smoothed indicator of [a, b] with sin^2 ramps of width (b - a) / 4; unit mass.
  auto bump = [](double a, double b) {
    const double eps = 0.25 * (b - a);
    const double mass = (b - a) - eps;
    return [a, b, eps, mass](double x) {
      auto ramp = [](double t) {
        if (t <= 0.0) return 0.0;
        if (t >= 1.0) return 1.0;
        const double s = std::sin(0.5 * std::numbers::pi * t);
        return s * s;
      };
      return ramp((x - a) / eps) * ramp((b - x) / eps) / mass;
    };
  };
  std::vector<ScalarFunction> weights;
  if (dim == 1) {
    for (std::size_t i = 0; i < k; ++i) {
      const double a = static_cast<double>(i) / static_cast<double>(k);
      const double b = static_cast<double>(i + 1) / static_cast<double>(k);
      weights.emplace_back([w = bump(a, b)](Point p) { return w(p.x); });
    }
  } else if (dim == 2) {
    const auto m = static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(k))));
    if (m * m != k) throw std::invalid_argument("mollified_indicators: 2D needs k = m*m");
    for (std::size_t iy = 0; iy < m; ++iy) {
      for (std::size_t ix = 0; ix < m; ++ix) {
        const double md = static_cast<double>(m);
        auto wx = bump(static_cast<double>(ix) / md, static_cast<double>(ix + 1) / md);
        auto wy = bump(static_cast<double>(iy) / md, static_cast<double>(iy + 1) / md);
        weights.emplace_back([wx, wy](Point p) { return wx(p.x) * wy(p.y); });
      }
    }
  } else {
    throw std::invalid_argument("mollified_indicators: dim must be 1 or 2");
  }
  return ObservationSet(std::move(weights));
}

std::vector<std::vector<double>> ObservationSet::representers(const FemLevel& level) const {
  std::vector<std::vector<double>> reps;
  reps.reserve(weights_.size());
  for (const auto& w : weights_) reps.push_back(level.integrate_basis(w));
  return reps;
}

std::vector<double> observe(const ForwardSolution& sol, const ObservationSet& obs) {
  if (sol.level == nullptr) throw std::invalid_argument("observe: solution without a level");
  const auto reps = obs.representers(*sol.level);
  std::vector<double> out;
  out.reserve(reps.size());
  for (const auto& r : reps) out.push_back(dot(r, sol.nodal));
  return out;
}

std::vector<double> prolongate(int dim, int from, int to, std::span<const double> values) {
  if (to < from) throw std::invalid_argument("prolongate: target level is coarser than source");
  std::vector<double> v(values.begin(), values.end());
  for (int l = from + 1; l <= to; ++l) v = FemLevel(dim, l).prolongate_from_coarser(v);
  return v;
}

double h1_seminorm_error(const ForwardSolution& a, const ForwardSolution& b) {
  if (a.level == nullptr || b.level == nullptr) throw std::invalid_argument("h1_seminorm_error: missing level");
  if (a.level->dim() != b.level->dim()) {
    throw std::invalid_argument("h1_seminorm_error: solutions live on non-nested meshes");
  }
  const ForwardSolution& fine = a.level->level() >= b.level->level() ? a : b;
  const ForwardSolution& coarse = &fine == &a ? b : a;
  const std::vector<double> up =
      prolongate(fine.level->dim(), coarse.level->level(), fine.level->level(), coarse.nodal);
  std::vector<double> diff(up.size());
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = fine.nodal[i] - up[i];
  return fine.level->energy_norm(diff);
}

double h1_seminorm_error(const ForwardSolution& a, const std::function<Point(Point)>& exact_grad) {
  if (a.level == nullptr) throw std::invalid_argument("h1_seminorm_error: missing level");
  return a.level->h1_error(a.nodal, exact_grad);
}

}  // namespace invert
