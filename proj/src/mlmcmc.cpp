#include "invert/mlmcmc.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>

#include "invert/oracle.hpp"
#include "invert/sampler.hpp"

namespace invert {

std::size_t MlmcmcSchedule::M(int l, int lp) const {
  const int e = L - l - lp;
  const double m = std::ceil(sample_scale * std::ldexp(1.0, 2 * std::max(e, 0)));
  return static_cast<std::size_t>(std::max(m, 1.0));
}

std::size_t MlmcmcSchedule::dimension() const { return *std::max_element(J.begin(), J.end()); }

std::size_t MlmcmcSchedule::n_terms() const {
  std::size_t n = 0;
  for (int l = 0; l <= L; ++l) n += static_cast<std::size_t>(l_prime_max[l] + 1);
  return n;
}

std::uint64_t MlmcmcSchedule::stream(std::size_t replica, int l, int lp, int role) {
  return (static_cast<std::uint64_t>(replica) << 20) + static_cast<std::uint64_t>(l * 64 + lp) * 2 +
         static_cast<std::uint64_t>(role);
}

MlmcmcSchedule make_schedule(int L, double q, std::uint64_t master_seed, std::size_t j_cap, bool full_rectangle) {
  if (L < 0 || L > 24) throw std::invalid_argument("make_schedule: L must lie in [0, 24]");
  if (!(q > 0.0)) throw std::invalid_argument("make_schedule: q must be positive");
  if (j_cap == 0) throw std::invalid_argument("make_schedule: J cap must be positive");
  MlmcmcSchedule s;
  s.L = L;
  s.q = q;
  s.master_seed = master_seed;
  for (int l = 0; l <= L; ++l) {
    const double e = std::ceil(static_cast<double>(l) / q - 1e-12);
    const double j = std::ldexp(1.0, static_cast<int>(e));
    s.J.push_back(std::min(static_cast<std::size_t>(j), j_cap));
    s.mesh_level.push_back(l);
    s.l_prime_max.push_back(full_rectangle ? L : L - l);
  }
  return s;
}

const FemForward& MlmcmcProblem::model(const MlmcmcSchedule& s, int l) const {
  return family->forward(s.J[static_cast<std::size_t>(l)], s.mesh_level[static_cast<std::size_t>(l)]);
}

double MlmcmcProblem::potential(const MlmcmcSchedule& s, int l, EvalContext& ctx) const {
  return likelihood->potential(ctx.at(model(s, l)));
}

double MlmcmcProblem::delta_qoi(const MlmcmcSchedule& s, int lp, EvalContext& ctx) const {
  const double fine = ctx.at(model(s, lp)).qoi;
  return lp == 0 ? fine : fine - ctx.at(model(s, lp - 1)).qoi;
}

namespace {

double clamp_delta(double d, std::atomic<std::uint64_t>& clamps) {
  if (d > kDeltaPhiClamp || d < -kDeltaPhiClamp) {
    clamps.fetch_add(1, std::memory_order_relaxed);
    return std::clamp(d, -kDeltaPhiClamp, kDeltaPhiClamp);
  }
  return d;
}

double sample_variance(std::span<const double> trace, std::size_t stride, std::size_t c) {
  const std::size_t n = trace.size() / stride;
  if (n < 2) return 0.0;
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean += trace[i * stride + c];
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) ss += (trace[i * stride + c] - mean) * (trace[i * stride + c] - mean);
  return ss / static_cast<double>(n - 1);
}

}  // namespace

LevelDifferenceTerm level_difference_term(const MlmcmcProblem& problem, const MlmcmcSchedule& sched, int l, int lp,
                                          std::size_t replica, std::size_t M) {
  if (l < 0 || l > sched.L || lp < 0 || lp > sched.l_prime_max[static_cast<std::size_t>(l)]) {
    throw std::invalid_argument("level_difference_term: (l, l') outside the schedule");
  }
  LevelDifferenceTerm t;
  t.l = l;
  t.lp = lp;
  t.M = M != 0 ? M : sched.M(l, lp);
  const std::size_t dim = sched.dimension();
  std::atomic<std::uint64_t> clamps{0};

  // Observables on the level-l chain: [integrand of A, integrand of B, Delta Phi, Delta l].
  Observables fine{4, [&](EvalContext& ctx, std::span<double> out) {
                     const double dq = problem.delta_qoi(sched, lp, ctx);
                     if (l == 0) {
                       out[0] = dq;
                       out[1] = 0.0;
                       out[2] = 0.0;
                     } else {
                       const double dphi = problem.potential(sched, l, ctx) - problem.potential(sched, l - 1, ctx);
                       const double e = std::exp(clamp_delta(dphi, clamps));
                       out[0] = (1.0 - e) * dq;
                       out[1] = e - 1.0;
                       out[2] = dphi;
                     }
                     out[3] = dq;
                   }};
  auto phi_fine = [&](EvalContext& ctx) { return problem.potential(sched, l, ctx); };
  try {
    ChainRun a(phi_fine, fine, {dim, sched.master_seed, MlmcmcSchedule::stream(replica, l, lp, 0), 0, true, false, nullptr});
    a.run(t.M);
    const auto tr = a.trace();
    t.A = a.sums()[0] / static_cast<double>(a.retained());
    t.B = a.sums()[1] / static_cast<double>(a.retained());
    t.variance = sample_variance(tr, 4, 0);
    for (std::size_t i = 0; i < a.retained(); ++i) {
      t.max_abs_delta_phi = std::max(t.max_abs_delta_phi, std::abs(tr[i * 4 + 2]));
      t.max_abs_delta_qoi = std::max(t.max_abs_delta_qoi, std::abs(tr[i * 4 + 3]));
    }
    t.work += a.work();

    if (l > 0) {
      Observables coarse{1, [&](EvalContext& ctx, std::span<double> out) { out[0] = problem.delta_qoi(sched, lp, ctx); }};
      auto phi_coarse = [&](EvalContext& ctx) { return problem.potential(sched, l - 1, ctx); };
      ChainRun b(phi_coarse, coarse,
                 {dim, sched.master_seed, MlmcmcSchedule::stream(replica, l, lp, 1), 0, false, false, nullptr});
      b.run(t.M);
      t.C = b.sums()[0] / static_cast<double>(b.retained());
      t.work += b.work();
    }
  } catch (const ChainFailure& e) {
    throw ChainFailure(e.step(), "term (" + std::to_string(l) + ", " + std::to_string(lp) + "): " + e.what());
  }
  t.clamps = clamps.load();
  t.contribution = l == 0 ? t.A : t.A + t.B * t.C;
  return t;
}

MlmcmcResult estimate(const MlmcmcProblem& problem, const MlmcmcSchedule& sched, std::size_t replica,
                      Execution exec) {
  std::vector<std::pair<int, int>> index;
  for (int l = 0; l <= sched.L; ++l) {
    for (int lp = 0; lp <= sched.l_prime_max[static_cast<std::size_t>(l)]; ++lp) index.emplace_back(l, lp);
  }
  // Largest sample sizes first keeps the dynamic schedule balanced.
  std::vector<std::size_t> order(index.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return sched.M(index[a].first, index[a].second) > sched.M(index[b].first, index[b].second);
  });
  MlmcmcResult res;
  res.terms.resize(index.size());
  for_each_index(order.size(), exec, [&](std::size_t i) {
    const std::size_t t = order[i];
    res.terms[t] = level_difference_term(problem, sched, index[t].first, index[t].second, replica);
  });
  for (const auto& t : res.terms) {
    res.estimate += t.contribution;
    res.work += t.work;
    res.clamps += t.clamps;
  }
  return res;
}

double quadrature_level_expectation(const MlmcmcProblem& problem, const MlmcmcSchedule& sched, int l, int m,
                                    std::size_t quad_order, ForwardCache* cache, Execution exec) {
  const QuadratureGrid grid(sched.dimension(), quad_order);
  Observables g{1, [&](EvalContext& ctx, std::span<double> out) { out[0] = ctx.at(problem.model(sched, m)).qoi; }};
  return weighted_expectation_quadrature([&](EvalContext& ctx) { return problem.potential(sched, l, ctx); }, g, grid,
                                         cache, exec)
      .mean[0];
}

ExactTerms quadrature_terms(const MlmcmcProblem& problem, const MlmcmcSchedule& sched, std::size_t quad_order,
                            ForwardCache* cache, Execution exec) {
  const QuadratureGrid grid(sched.dimension(), quad_order);
  ExactTerms out;
  for (int l = 0; l <= sched.L; ++l) {
    for (int lp = 0; lp <= sched.l_prime_max[static_cast<std::size_t>(l)]; ++lp) {
      LevelDifferenceTerm t;
      t.l = l;
      t.lp = lp;
      std::atomic<std::uint64_t> clamps{0};
      Observables fine{2, [&](EvalContext& ctx, std::span<double> o) {
                         const double dq = problem.delta_qoi(sched, lp, ctx);
                         if (l == 0) {
                           o[0] = dq;
                           o[1] = 0.0;
                           return;
                         }
                         const double dphi = problem.potential(sched, l, ctx) - problem.potential(sched, l - 1, ctx);
                         const double e = std::exp(clamp_delta(dphi, clamps));
                         o[0] = (1.0 - e) * dq;
                         o[1] = e - 1.0;
                       }};
      const auto ea = weighted_expectation_quadrature(
          [&](EvalContext& ctx) { return problem.potential(sched, l, ctx); }, fine, grid, cache, exec);
      t.A = ea.mean[0];
      t.B = ea.mean[1];
      t.work += ea.work;
      if (l > 0) {
        Observables coarse{1, [&](EvalContext& ctx, std::span<double> o) { o[0] = problem.delta_qoi(sched, lp, ctx); }};
        const auto ec = weighted_expectation_quadrature(
            [&](EvalContext& ctx) { return problem.potential(sched, l - 1, ctx); }, coarse, grid, cache, exec);
        t.C = ec.mean[0];
        t.work += ec.work;
      }
      t.clamps = clamps.load();
      t.contribution = l == 0 ? t.A : t.A + t.B * t.C;
      out.sum += t.contribution;
      out.terms.push_back(t);
    }
  }
  return out;
}

}  // namespace invert
