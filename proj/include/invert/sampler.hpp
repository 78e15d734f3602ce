#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "invert/bayes.hpp"
#include "invert/forward.hpp"
#include "invert/rng.hpp"

namespace invert {

/// 1 ^ exp(phi_u - phi_v).
double acceptance_prob(double phi_u, double phi_v) noexcept;
double acceptance_prob(const PosteriorSpec& spec, std::span<const double> u, std::span<const double> v);

using PotentialFn = std::function<double(EvalContext&)>;

/// A solve failed inside a chain; reports the step at which it happened.
class ChainFailure : public std::runtime_error {
 public:
  ChainFailure(std::uint64_t step, const std::string& what);
  std::uint64_t step() const noexcept { return step_; }

 private:
  std::uint64_t step_;
};

struct ChainOptions {
  std::size_t dimension = 1;  // number of proposed coordinates
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  std::size_t burn_in = 0;
  bool keep_trace = true;
  bool keep_states = false;
  ForwardCache* cache = nullptr;
};

/// Independence sampler with prior proposals on [-1,1]^J.
///
/// Step k >= 1 draws v_j = rng.symmetric(k, j), j < J, and the acceptance
/// uniform rng.uniform(k, J); the initial state uses step 0. The potential
/// and observables of the current state are kept, so each step evaluates
/// only the proposal.
class ChainRun {
 public:
  ChainRun(PotentialFn potential, Observables g, ChainOptions opts);
  ChainRun(const PosteriorSpec& spec, Observables g, ChainOptions opts);

  /// Advances one step. Steps during burn-in are not recorded in the trace.
  void step();
  void run(std::size_t steps);

  std::span<const double> state() const noexcept { return state_; }
  double current_potential() const noexcept { return phi_; }
  std::span<const double> current_observables() const noexcept { return current_g_; }

  std::uint64_t steps() const noexcept { return step_; }
  std::uint64_t accepted() const noexcept { return accepted_; }
  double acceptance_rate() const noexcept;
  /// Retained (post burn-in) samples per observable component.
  std::size_t retained() const noexcept { return retained_; }
  std::span<const double> sums() const noexcept { return sums_; }
  /// Row-major trace of retained observables, retained() rows of count() values.
  std::span<const double> trace() const noexcept { return trace_; }
  /// Row-major trace of retained states when keep_states is set.
  std::span<const double> state_trace() const noexcept { return state_trace_; }
  std::size_t count() const noexcept { return g_.count; }
  std::size_t dimension() const noexcept { return opts_.dimension; }

  const Work& work() const noexcept { return work_; }
  /// Largest potential seen over states and proposals.
  double max_potential() const noexcept { return max_phi_; }
  /// Number of steps where the computed alpha fell below exp(-Phi(v)).
  std::uint64_t alpha_bound_violations() const noexcept { return alpha_violations_; }
  /// Smallest alpha computed so far.
  double min_alpha() const noexcept { return min_alpha_; }
  const std::vector<double>& alphas() const noexcept { return alphas_; }
  void record_alphas(bool on) { record_alphas_ = on; }

 private:
  void evaluate(std::span<const double> u, double& phi, std::vector<double>& g);
  void record();

  PotentialFn potential_;
  Observables g_;
  ChainOptions opts_;
  CounterRng rng_;

  std::vector<double> state_;
  std::vector<double> proposal_;
  std::vector<double> current_g_;
  std::vector<double> proposal_g_;
  double phi_ = 0.0;

  std::uint64_t step_ = 0;
  std::uint64_t accepted_ = 0;
  std::size_t retained_ = 0;
  std::vector<double> sums_;
  std::vector<double> trace_;
  std::vector<double> state_trace_;
  Work work_;
  double max_phi_ = 0.0;
  std::uint64_t alpha_violations_ = 0;
  double min_alpha_ = 1.0;
  bool record_alphas_ = false;
  std::vector<double> alphas_;
};

/// Batch-means mean and standard error of a scalar series with ceil(sqrt(n))
/// batches. Fewer than two full batches gives a NaN standard error.
struct BatchMeans {
  double mean = 0.0;
  double se = 0.0;
  std::size_t batches = 0;
  std::size_t batch_size = 0;
};

BatchMeans batch_means(std::span<const double> x);
/// Same for component `component` of a row-major trace with `stride` columns.
BatchMeans batch_means(std::span<const double> trace, std::size_t stride, std::size_t component);

struct ChainEstimate {
  std::vector<double> mean;
  std::vector<double> se;
  double acceptance_rate = 0.0;
  double max_potential = 0.0;
  std::uint64_t alpha_bound_violations = 0;
  Work work;
};

/// Runs burn_in + M steps and averages the last M states.
ChainEstimate run_estimate(const PosteriorSpec& spec, const Observables& g, std::size_t M, std::size_t burn_in,
                           std::uint64_t seed, std::uint64_t stream = 0, ForwardCache* cache = nullptr);
ChainEstimate run_estimate(const PotentialFn& potential, std::size_t dimension, const Observables& g, std::size_t M,
                           std::size_t burn_in, std::uint64_t seed, std::uint64_t stream = 0,
                           ForwardCache* cache = nullptr);

}  // namespace invert
