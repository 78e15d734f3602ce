#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "invert/forward.hpp"
#include "invert/parallel.hpp"

namespace invert {

/// Finitely supported multi-index stored as (coordinate, degree) pairs with
/// degree >= 1, sorted by coordinate. Coordinates are zero based.
class MultiIndex {
 public:
  MultiIndex() = default;
  explicit MultiIndex(std::vector<std::pair<std::uint32_t, std::uint32_t>> terms);
  static MultiIndex from_dense(std::span<const std::uint32_t> degrees);

  const std::vector<std::pair<std::uint32_t, std::uint32_t>>& terms() const noexcept { return terms_; }
  bool is_zero() const noexcept { return terms_.empty(); }
  std::uint32_t order() const noexcept;  // |nu|
  std::uint32_t degree(std::uint32_t coord) const noexcept;
  std::string to_string() const;

  bool operator==(const MultiIndex& o) const = default;
  bool operator<(const MultiIndex& o) const { return terms_ < o.terms_; }

 private:
  std::vector<std::pair<std::uint32_t, std::uint32_t>> terms_;
};

/// sqrt(2n+1) P_n(t), orthonormal for dt/2 on [-1,1].
double legendre_eval(unsigned n, double t);
/// L_0(t) .. L_n(t) by the three-term recurrence.
void legendre_all(unsigned n, double t, std::span<double> out);
/// prod_j L_{nu_j}(u_j).
double tensor_legendre(const MultiIndex& nu, std::span<const double> u);

/// Weight of coordinate j (zero based) in the anisotropic degree budget.
double candidate_weight(std::size_t j) noexcept;
/// {nu : nu_j <= max_degree, sum_j nu_j w_j <= cap} over J coordinates.
/// An infinite cap gives the full tensor set.
std::vector<MultiIndex> candidate_set(std::size_t J, unsigned max_degree,
                                      double cap = std::numeric_limits<double>::infinity());

struct GpcOptions {
  std::size_t quad_order = 8;
  double degree_cap = std::numeric_limits<double>::infinity();
  std::size_t N = 0;  // 0 keeps every candidate
};

/// Legendre chaos expansion of (G, l) storing k + 1 scalars per active index.
/// Indices are stored with the zero index first, then by decreasing row norm.
class GpcSurrogate {
 public:
  GpcSurrogate() = default;

  std::size_t k() const noexcept { return k_; }
  std::size_t J() const noexcept { return J_; }
  int l_build() const noexcept { return l_build_; }
  std::size_t size() const noexcept { return indices_.size(); }
  std::size_t candidates() const noexcept { return candidates_; }
  const MultiIndex& index(std::size_t i) const { return indices_[i]; }
  std::span<const double> row(std::size_t i) const { return {coeffs_.data() + i * (k_ + 1), k_ + 1}; }
  double row_norm(std::size_t i) const;

  double total_energy() const noexcept { return total_energy_; }
  double candidate_energy() const noexcept { return candidate_energy_; }
  double kept_energy() const noexcept { return kept_energy_; }
  double tail_energy() const noexcept { return tail_energy_; }
  const Work& build_work() const noexcept { return build_work_; }

  /// Writes the observation part into obs (length k) and returns the QoI part.
  double eval(std::span<const double> u, std::span<double> obs) const;
  ForwardOutput evaluate(std::span<const double> u) const;

  /// First N stored indices (the best N-term subset, zero index included).
  GpcSurrogate truncated(std::size_t N) const;

  void save(std::ostream& os) const;
  static GpcSurrogate load(std::istream& is);
  void save(const std::string& path) const;
  static GpcSurrogate load(const std::string& path);

  bool operator==(const GpcSurrogate& o) const;

 private:
  friend GpcSurrogate build_surrogate(const ForwardModel&, int, const GpcOptions&, Execution, ForwardCache*);

  std::size_t k_ = 0;
  std::size_t J_ = 0;
  int l_build_ = 0;
  std::size_t candidates_ = 0;
  unsigned max_degree_ = 0;
  std::vector<MultiIndex> indices_;
  std::vector<double> coeffs_;  // size() rows of k + 1
  std::vector<double> discarded_norms_;
  double total_energy_ = 0.0;
  double candidate_energy_ = 0.0;
  double kept_energy_ = 0.0;
  double tail_energy_ = 0.0;
  Work build_work_;
};

/// Projects the model's outputs onto the candidate set by tensor
/// Gauss-Legendre quadrature (one solve per node) and keeps the best N rows.
GpcSurrogate build_surrogate(const ForwardModel& model, int l_build, const GpcOptions& opts,
                             Execution exec = Execution::parallel, ForwardCache* cache = nullptr);

/// The surrogate as a forward model, so the sampler can use it unchanged.
class SurrogateForward final : public ForwardModel {
 public:
  explicit SurrogateForward(std::shared_ptr<const GpcSurrogate> s) : s_(std::move(s)) {}
  std::size_t truncation() const override { return s_->J(); }
  std::size_t n_observations() const override { return s_->k(); }
  ForwardOutput evaluate(std::span<const double> u) const override { return s_->evaluate(u); }
  std::string describe() const override;
  const GpcSurrogate& surrogate() const noexcept { return *s_; }

 private:
  std::shared_ptr<const GpcSurrogate> s_;
};

/// Bounded QoI g(u) = clamp(q(u), -bound, bound); counts clamped evaluations.
class QoiCutoff {
 public:
  explicit QoiCutoff(double bound) : bound_(bound) {}
  double operator()(double q) const noexcept;
  double bound() const noexcept { return bound_; }
  std::uint64_t clamps() const noexcept { return clamps_.load(); }
  std::uint64_t evaluations() const noexcept { return evaluations_.load(); }

 private:
  double bound_;
  mutable std::atomic<std::uint64_t> clamps_{0};
  mutable std::atomic<std::uint64_t> evaluations_{0};
};

/// max |l(P(u))| + 1 over n prior draws of the model.
double estimate_qoi_bound(const ForwardModel& model, std::size_t n, std::uint64_t seed,
                          Execution exec = Execution::parallel);

/// Observables for the clamped surrogate QoI.
Observables qoi_cutoff(const SurrogateForward& model, const QoiCutoff& cutoff);

/// sqrt(int |G_ref(u) - G_s(u)|^2 drho) by tensor quadrature.
double surrogate_l2_error(const GpcSurrogate& s, const ForwardModel& ref, std::size_t quad_order,
                          Execution exec = Execution::parallel, ForwardCache* cache = nullptr);

}  // namespace invert
