#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "invert/field.hpp"

namespace invert {

/// Work tally attached to every forward solve. Totals are always sums of
/// per-solve tallies.
struct Work {
  std::uint64_t solves = 0;
  std::uint64_t ndof = 0;
  double flops = 0.0;

  Work& operator+=(const Work& o) noexcept {
    solves += o.solves;
    ndof += o.ndof;
    flops += o.flops;
    return *this;
  }
};

struct CsrMatrix {
  std::size_t n = 0;
  std::vector<std::size_t> row_ptr;
  std::vector<std::size_t> col;
  std::vector<std::size_t> diag;  // slot of the diagonal entry in each row
  std::vector<double> val;

  std::size_t nnz() const noexcept { return col.size(); }
  void multiply(std::span<const double> x, std::span<double> y) const;
  /// Entry lookup; zero if (i, j) is outside the pattern.
  double at(std::size_t i, std::size_t j) const;
};

/// Uniform nested mesh of (0,1)^d with meshwidth h_l = 2^{-l} h_0, h_0 = 1/2,
/// and its P1 space on interior nodes. 1D elements are intervals; 2D elements
/// are right triangles obtained by cutting each grid square along the
/// (0,0)-(1,1) diagonal, which keeps the meshes nested under refinement.
class FemLevel {
 public:
  FemLevel(int dim, int level);

  int dim() const noexcept { return dim_; }
  int level() const noexcept { return level_; }
  double h() const noexcept { return h_; }
  std::size_t cells_per_side() const noexcept { return cells_; }
  std::size_t n_dof() const noexcept { return n_dof_; }
  std::size_t n_elements() const noexcept { return n_elements_; }
  Point dof_point(std::size_t dof) const;

  /// Quadrature points for the variable coefficient: element midpoints in 1D,
  /// the three-point interior rule in 2D. Ordered element by element.
  std::span<const Point> coefficient_points() const noexcept { return coef_points_; }
  std::size_t points_per_element() const noexcept { return dim_ == 1 ? 1 : 3; }

  /// Stiffness pattern with zero values; copy and fill with assemble_stiffness.
  const CsrMatrix& pattern() const noexcept { return pattern_; }
  /// Writes stiffness values for the coefficient sampled at coefficient_points().
  void assemble_stiffness(std::span<const double> k_at_points, std::span<double> values) const;
  /// Stiffness matrix for K = 1.
  const CsrMatrix& laplacian() const noexcept { return laplacian_; }

  /// (integral of w * phi_i) for every interior basis function, by a
  /// degree-5 (1D) / degree-4 (2D) element rule.
  std::vector<double> integrate_basis(const ScalarFunction& w) const;

  /// |grad v|_{L2} for a discrete function given by interior nodal values.
  double energy_norm(std::span<const double> v) const;

  /// |grad(v_h - p)|_{L2} against an analytic gradient.
  double h1_error(std::span<const double> v, const std::function<Point(Point)>& exact_grad) const;

  /// Nodal interpolation of a level-(l-1) function onto this level.
  std::vector<double> prolongate_from_coarser(std::span<const double> coarse) const;

 private:
  struct Scatter {
    std::uint32_t element;
    std::uint32_t slot;
    double coef;
  };
  struct Element {
    std::array<Point, 3> vertex{};
    std::array<long, 3> dof{-1, -1, -1};  // -1 marks boundary vertices
    int n_vertices = 2;
    double measure = 0.0;
    std::array<Point, 3> grad{};  // gradients of the local basis functions
  };

  long interior_dof(std::size_t i, std::size_t j) const;
  void build_mesh();
  void build_pattern();

  int dim_;
  int level_;
  double h_;
  std::size_t cells_;
  std::size_t n_dof_ = 0;
  std::size_t n_elements_ = 0;
  std::vector<Element> elements_;
  std::vector<Point> coef_points_;
  CsrMatrix pattern_;
  CsrMatrix laplacian_;
  std::vector<Scatter> scatter_;
};

/// Mode values at a level's coefficient points, cached so that assembling
/// K^J(x_q, u) costs O(J) per quadrature point.
class CoefficientTable {
 public:
  CoefficientTable(const FemLevel& level, const CoefficientField& field, std::size_t J);

  std::size_t truncation() const noexcept { return J_; }
  std::size_t n_points() const noexcept { return kbar_.size(); }
  /// Writes K^J(x_q, u) at every coefficient point; uses u[0..J).
  void evaluate(std::span<const double> u, std::span<double> k) const;

 private:
  std::size_t J_;
  std::vector<double> kbar_;
  std::vector<double> modes_;  // J rows of n_points values
};

struct AssembledSystem {
  CsrMatrix matrix;
  std::vector<double> load;
  double assembly_flops = 0.0;
};

/// Thrown when PCG hits its iteration cap; carries the residual history.
class SolverFailure : public std::runtime_error {
 public:
  SolverFailure(const std::string& what, std::vector<double> history)
      : std::runtime_error(what), history_(std::move(history)) {}
  const std::vector<double>& residual_history() const noexcept { return history_; }

 private:
  std::vector<double> history_;
};

struct CgResult {
  std::vector<double> x;
  std::size_t iterations = 0;
  double residual_norm = 0.0;
  double flops = 0.0;
};

/// Conjugate gradients preconditioned by one symmetric Gauss-Seidel sweep.
/// Stops when |r| <= rel_tol * |b|. Zero right-hand side returns immediately.
CgResult pcg_sgs(const CsrMatrix& a, std::span<const double> b, double rel_tol, std::size_t max_iter);

/// Default relative residual target for a level.
double default_cg_tolerance(int level, double factor);

struct ForwardSolution {
  const FemLevel* level = nullptr;
  std::vector<double> nodal;  // interior nodal values
  std::size_t iterations = 0;
  double residual_norm = 0.0;
  Work work;
};

AssembledSystem assemble(const FemLevel& level, const CoefficientField& field, std::span<const double> u,
                         const ScalarFunction& f);

ForwardSolution solve(const FemLevel& level, const CoefficientField& field, std::span<const double> u,
                      const ScalarFunction& f, double tol);

/// k locally supported weights w_i; O_i(P) = integral of w_i P.
class ObservationSet {
 public:
  explicit ObservationSet(std::vector<ScalarFunction> weights);

  /// Smoothed indicators of k disjoint cells, each with unit mass. In 1D the
  /// cells are k equal subintervals; in 2D k must be a square m*m.
  static ObservationSet mollified_indicators(int dim, std::size_t k);

  std::size_t size() const noexcept { return weights_.size(); }
  const ScalarFunction& weight(std::size_t i) const { return weights_[i]; }
  std::vector<std::vector<double>> representers(const FemLevel& level) const;

 private:
  std::vector<ScalarFunction> weights_;
};

std::vector<double> observe(const ForwardSolution& sol, const ObservationSet& obs);

/// |grad(P_a - P_b)|_{L2}; the coarser solution is prolongated to the finer mesh.
double h1_seminorm_error(const ForwardSolution& a, const ForwardSolution& b);
double h1_seminorm_error(const ForwardSolution& a, const std::function<Point(Point)>& exact_grad);

/// Prolongates interior nodal values from level `from` to level `to` >= from.
std::vector<double> prolongate(int dim, int from, int to, std::span<const double> values);

}  // namespace invert
