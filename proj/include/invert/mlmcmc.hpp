#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <vector>

#include "invert/bayes.hpp"
#include "invert/forward.hpp"
#include "invert/parallel.hpp"

namespace invert {

/// Level hierarchy and sample sizes of the multilevel estimator.
struct MlmcmcSchedule {
  int L = 0;
  double q = 1.0;
  std::vector<std::size_t> J;        // J_l, l = 0..L
  std::vector<int> mesh_level;       // FE level used for index l (identity unless overridden)
  std::vector<int> l_prime_max;      // L'(l)
  std::uint64_t master_seed = 0;
  double sample_scale = 1.0;         // M_{ll'} = ceil(scale * 4^{L-l-l'})

  std::size_t M(int l, int lp) const;
  /// Proposal dimension shared by all chains: the largest J_l.
  std::size_t dimension() const;
  std::size_t n_terms() const;
  /// Stream id of one chain. role 0 targets level l, role 1 level l - 1.
  static std::uint64_t stream(std::size_t replica, int l, int lp, int role);
};

/// J_l = min(2^ceil(l/q), j_cap), L'(l) = L - l, M_{ll'} = 4^{L-l-l'}.
/// full_rectangle sets L'(l) = L for every l (used by the exact telescoping check).
MlmcmcSchedule make_schedule(int L, double q, std::uint64_t master_seed, std::size_t j_cap = SIZE_MAX,
                             bool full_rectangle = false);

/// Family of forward models plus the shared likelihood.
struct MlmcmcProblem {
  const ModelFamily* family = nullptr;
  std::shared_ptr<const Likelihood> likelihood;

  const FemForward& model(const MlmcmcSchedule& s, int l) const;
  double potential(const MlmcmcSchedule& s, int l, EvalContext& ctx) const;
  /// l(P^{J_l', l'}) - l(P^{J_{l'-1}, l'-1}), with the level -1 term taken as zero.
  double delta_qoi(const MlmcmcSchedule& s, int lp, EvalContext& ctx) const;
};

/// Clamp applied to Delta Phi before exponentiation.
inline constexpr double kDeltaPhiClamp = 50.0;

struct LevelDifferenceTerm {
  int l = 0;
  int lp = 0;
  std::size_t M = 0;
  double A = 0.0;
  double B = 0.0;
  double C = 0.0;
  double contribution = 0.0;
  double variance = 0.0;  // empirical variance of the A integrand
  double max_abs_delta_phi = 0.0;
  double max_abs_delta_qoi = 0.0;
  std::uint64_t clamps = 0;
  Work work;
};

/// Runs the (l, l') chains. M overrides the schedule's sample size when nonzero.
LevelDifferenceTerm level_difference_term(const MlmcmcProblem& problem, const MlmcmcSchedule& sched, int l, int lp,
                                          std::size_t replica = 0, std::size_t M = 0);

struct MlmcmcResult {
  double estimate = 0.0;
  std::vector<LevelDifferenceTerm> terms;  // sorted by (l, l')
  Work work;
  std::uint64_t clamps = 0;
};

/// Sum of all term contributions, terms evaluated concurrently and added in (l, l') order.
MlmcmcResult estimate(const MlmcmcProblem& problem, const MlmcmcSchedule& sched, std::size_t replica = 0,
                      Execution exec = Execution::parallel);

/// Term values with every sample average replaced by tensor quadrature.
struct ExactTerms {
  double sum = 0.0;
  std::vector<LevelDifferenceTerm> terms;
};

ExactTerms quadrature_terms(const MlmcmcProblem& problem, const MlmcmcSchedule& sched, std::size_t quad_order,
                            ForwardCache* cache = nullptr, Execution exec = Execution::parallel);

/// E^{rho^{J_l, l}}[l(P^{J_m, m})] for hierarchy indices l and m, by quadrature.
double quadrature_level_expectation(const MlmcmcProblem& problem, const MlmcmcSchedule& sched, int l, int m,
                                    std::size_t quad_order, ForwardCache* cache = nullptr,
                                    Execution exec = Execution::parallel);

}  // namespace invert
