// Serial reference loops against the OpenMP kernels on the embarrassingly
// parallel parts: quadrature-node solves, replicated chains, gpc build.

#include <benchmark/benchmark.h>

#include <memory>
#include <vector>

#include "invert/bayes.hpp"
#include "invert/forward.hpp"
#include "invert/gpc.hpp"
#include "invert/oracle.hpp"
#include "invert/parallel.hpp"
#include "invert/sampler.hpp"

namespace {

using namespace invert;

struct Problem {
  ModelFamily family{ProblemSetup{1, 2.0, 1.0, 4, 4, 1e-10}};
  std::shared_ptr<const Likelihood> lik;

  Problem() {
    const NoiseModel noise = NoiseModel::isotropic(4, 0.1);
    auto l = std::make_shared<Likelihood>(Likelihood{{}, noise});
    l->data = synthesize_data(family.forward(4, 7), std::vector<double>{0.5, -0.5, 0.25, -0.25}, noise, 1);
    lik = l;
  }
};

Problem& problem() {
  static Problem p;
  return p;
}

Execution mode(const benchmark::State& state) { return state.range(0) == 0 ? Execution::serial : Execution::parallel; }

void BM_QuadratureOracle(benchmark::State& state) {
  auto& p = problem();
  const PosteriorSpec spec{&p.family.forward(2, 5), p.lik};
  const QuadratureGrid grid(2, 24);
  for (auto _ : state) {
    auto e = posterior_expectation_quadrature(spec, qoi_of(*spec.model), grid, nullptr, mode(state));
    benchmark::DoNotOptimize(e.mean);
  }
  state.SetLabel(state.range(0) == 0 ? "serial" : "openmp");
}

void BM_ChainReplicas(benchmark::State& state) {
  auto& p = problem();
  const PosteriorSpec spec{&p.family.forward(2, 4), p.lik};
  const Observables g = qoi_of(*spec.model);
  const std::size_t replicas = 16;
  for (auto _ : state) {
    std::vector<ChainEstimate> out(replicas);
    for_each_index(replicas, mode(state), [&](std::size_t r) { out[r] = run_estimate(spec, g, 2000, 0, 1, r); });
    benchmark::DoNotOptimize(out);
  }
  state.SetLabel(state.range(0) == 0 ? "serial" : "openmp");
}

void BM_GpcBuild(benchmark::State& state) {
  auto& p = problem();
  const FemForward& m = p.family.forward(4, 4);
  GpcOptions opts;
  opts.quad_order = 6;
  for (auto _ : state) {
    auto s = build_surrogate(m, 4, opts, mode(state));
    benchmark::DoNotOptimize(s);
  }
  state.SetLabel(state.range(0) == 0 ? "serial" : "openmp");
}

}  // namespace

BENCHMARK(BM_QuadratureOracle)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ChainReplicas)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_GpcBuild)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
