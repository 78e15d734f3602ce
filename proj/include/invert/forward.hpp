#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "invert/fem.hpp"
#include "invert/field.hpp"

namespace invert {

/// Observation vector G(u), quantity of interest l(P(u)) and the work spent.
struct ForwardOutput {
  std::vector<double> observations;
  double qoi = 0.0;
  Work work;
};

/// u -> (G(u), l(P(u))). Implementations read only the first truncation()
/// coordinates of u, so longer parameter vectors are accepted.
class ForwardModel {
 public:
  virtual ~ForwardModel() = default;
  virtual std::size_t truncation() const = 0;
  virtual std::size_t n_observations() const = 0;
  virtual ForwardOutput evaluate(std::span<const double> u) const = 0;
  virtual std::string describe() const = 0;
};

/// G^{J,l}: J-term coefficient truncation, P1 solve on level l.
class FemForward final : public ForwardModel {
 public:
  FemForward(std::shared_ptr<const FemLevel> level, std::shared_ptr<const CoefficientField> field, std::size_t J,
             const ObservationSet& obs, const ScalarFunction& qoi_weight, const ScalarFunction& load,
             double cg_tol);

  std::size_t truncation() const override { return table_.truncation(); }
  std::size_t n_observations() const override { return representers_.size(); }
  ForwardOutput evaluate(std::span<const double> u) const override;
  std::string describe() const override;

  /// Full nodal solution, for diagnostics that need more than functionals.
  ForwardSolution solve(std::span<const double> u) const;

  const FemLevel& level() const noexcept { return *level_; }
  double cg_tolerance() const noexcept { return cg_tol_; }

 private:
  std::shared_ptr<const FemLevel> level_;
  std::shared_ptr<const CoefficientField> field_;
  CoefficientTable table_;
  std::vector<std::vector<double>> representers_;
  std::vector<double> qoi_representer_;
  std::vector<double> load_;
  double cg_tol_;
};

/// Thread-safe memo of forward outputs keyed by (model, exact parameter bits).
class ForwardCache {
 public:
  /// Returns the cached output, or evaluates and stores it. The bool is true
  /// when the model was actually evaluated.
  std::pair<ForwardOutput, bool> get(const ForwardModel& model, std::span<const double> u);
  std::size_t size() const;

 private:
  struct Key {
    const ForwardModel* model;
    std::vector<double> u;
    bool operator==(const Key& o) const { return model == o.model && u == o.u; }
  };
  struct KeyHash {
    std::size_t operator()(const Key& k) const noexcept;
  };
  mutable std::mutex mutex_;
  std::unordered_map<Key, ForwardOutput, KeyHash> map_;
};

/// Evaluation state for one parameter point. Outputs of each model are
/// computed at most once per context; work counts only real evaluations.
class EvalContext {
 public:
  explicit EvalContext(std::span<const double> u, ForwardCache* cache = nullptr) : u_(u), cache_(cache) {}

  std::span<const double> u() const noexcept { return u_; }
  const ForwardOutput& at(const ForwardModel& model);
  const Work& work() const noexcept { return work_; }

 private:
  std::span<const double> u_;
  ForwardCache* cache_;
  std::deque<std::pair<const ForwardModel*, ForwardOutput>> memo_;  // stable references
  Work work_;
};

/// Vector-valued function of a parameter point, evaluated through a context
/// so that it can combine outputs of several forward models.
struct Observables {
  std::size_t count = 0;
  std::function<void(EvalContext&, std::span<double>)> fn;
};

/// Wraps a scalar function of the context as a one-component Observables.
Observables scalar_observable(std::function<double(EvalContext&)> g);

/// l(P^{J,l}(u)) of the given model.
Observables qoi_of(const ForwardModel& model);

struct ProblemSetup {
  int dim = 1;
  double s = 2.0;
  double kappa = 1.0;
  std::size_t n_modes = 64;
  std::size_t n_observations = 4;
  double cg_tol_factor = 1e-10;
};

/// Owns the coefficient field, observation functionals, and lazily built
/// FemForward models for every (J, l) pair. References returned by forward()
/// stay valid for the lifetime of the family.
class ModelFamily {
 public:
  explicit ModelFamily(const ProblemSetup& setup);
  ModelFamily(std::shared_ptr<const CoefficientField> field, ObservationSet obs, double cg_tol_factor);

  const CoefficientField& field() const noexcept { return *field_; }
  std::shared_ptr<const CoefficientField> field_ptr() const noexcept { return field_; }
  const ObservationSet& observations() const noexcept { return obs_; }
  int dim() const noexcept { return field_->dim(); }
  double cg_tol_factor() const noexcept { return cg_tol_factor_; }

  std::shared_ptr<const FemLevel> level(int l) const;
  const FemForward& forward(std::size_t J, int l) const;

 private:
  std::shared_ptr<const CoefficientField> field_;
  ObservationSet obs_;
  double cg_tol_factor_;
  mutable std::mutex mutex_;
  mutable std::map<int, std::shared_ptr<const FemLevel>> levels_;
  mutable std::map<std::pair<std::size_t, int>, std::unique_ptr<FemForward>> models_;
};

}  // namespace invert
