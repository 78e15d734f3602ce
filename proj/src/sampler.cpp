#include "invert/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace invert {

double acceptance_prob(double phi_u, double phi_v) noexcept {
  const double d = phi_u - phi_v;
  return d >= 0.0 ? 1.0 : std::exp(d);
}

double acceptance_prob(const PosteriorSpec& spec, std::span<const double> u, std::span<const double> v) {
  return acceptance_prob(spec.potential(u), spec.potential(v));
}

ChainFailure::ChainFailure(std::uint64_t step, const std::string& what)
    : std::runtime_error("chain failed at step " + std::to_string(step) + ": " + what), step_(step) {}

ChainRun::ChainRun(const PosteriorSpec& spec, Observables g, ChainOptions opts)
    : ChainRun([spec](EvalContext& ctx) { return spec.potential(ctx); }, std::move(g), opts) {
  if (opts.dimension < spec.truncation()) throw std::invalid_argument("ChainRun: dimension below the model truncation");
}

ChainRun::ChainRun(PotentialFn potential, Observables g, ChainOptions opts)
    : potential_(std::move(potential)), g_(std::move(g)), opts_(opts), rng_(opts.seed, opts.stream) {
  if (opts_.dimension == 0) throw std::invalid_argument("ChainRun: dimension must be positive");
  state_.resize(opts_.dimension);
  proposal_.resize(opts_.dimension);
  current_g_.resize(g_.count);
  proposal_g_.resize(g_.count);
  sums_.assign(g_.count, 0.0);
  for (std::size_t j = 0; j < opts_.dimension; ++j) state_[j] = rng_.symmetric(0, j);
  try {
    evaluate(state_, phi_, current_g_);
  } catch (const std::exception& e) {
    throw ChainFailure(0, e.what());
  }
  max_phi_ = phi_;
}

void ChainRun::evaluate(std::span<const double> u, double& phi, std::vector<double>& g) {
  EvalContext ctx(u, opts_.cache);
  phi = potential_(ctx);
  if (g_.count > 0) g_.fn(ctx, g);
  work_ += ctx.work();
}

double ChainRun::acceptance_rate() const noexcept {
  return step_ == 0 ? 0.0 : static_cast<double>(accepted_) / static_cast<double>(step_);
}

void ChainRun::step() {
  const std::uint64_t k = ++step_;
  const std::size_t J = opts_.dimension;
  for (std::size_t j = 0; j < J; ++j) proposal_[j] = rng_.symmetric(k, j);
  const double w = rng_.uniform(k, J);
  double phi_v = 0.0;
  try {
    evaluate(proposal_, phi_v, proposal_g_);
  } catch (const std::exception& e) {
    throw ChainFailure(k, e.what());
  }
  max_phi_ = std::max(max_phi_, phi_v);
  const double alpha = acceptance_prob(phi_, phi_v);
  if (alpha < std::exp(-phi_v)) ++alpha_violations_;
  min_alpha_ = std::min(min_alpha_, alpha);
  if (record_alphas_) alphas_.push_back(alpha);
  if (alpha >= w) {
    std::swap(state_, proposal_);
    std::swap(current_g_, proposal_g_);
    phi_ = phi_v;
    ++accepted_;
  }
  if (k > opts_.burn_in) record();
}

void ChainRun::record() {
  ++retained_;
  for (std::size_t i = 0; i < g_.count; ++i) sums_[i] += current_g_[i];
  if (opts_.keep_trace) trace_.insert(trace_.end(), current_g_.begin(), current_g_.end());
  if (opts_.keep_states) state_trace_.insert(state_trace_.end(), state_.begin(), state_.end());
}

void ChainRun::run(std::size_t steps) {
  if (opts_.keep_trace) trace_.reserve(trace_.size() + steps * g_.count);
  for (std::size_t i = 0; i < steps; ++i) step();
}

BatchMeans batch_means(std::span<const double> trace, std::size_t stride, std::size_t component) {
  if (stride == 0 || component >= stride) throw std::invalid_argument("batch_means: bad stride");
  const std::size_t n = trace.size() / stride;
  BatchMeans bm;
  if (n == 0) {
    bm.mean = std::numeric_limits<double>::quiet_NaN();
    bm.se = bm.mean;
    return bm;
  }
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) total += trace[i * stride + component];
  bm.mean = total / static_cast<double>(n);
  bm.batches = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n))));
  bm.batch_size = n / bm.batches;
  if (bm.batch_size == 0 || bm.batches < 2) {
    bm.se = std::numeric_limits<double>::quiet_NaN();
    return bm;
  }
  const std::size_t used = bm.batches * bm.batch_size;
  double used_mean = 0.0;
  for (std::size_t i = 0; i < used; ++i) used_mean += trace[i * stride + component];
  used_mean /= static_cast<double>(used);
  double ss = 0.0;
  for (std::size_t b = 0; b < bm.batches; ++b) {
    double s = 0.0;
    for (std::size_t i = b * bm.batch_size; i < (b + 1) * bm.batch_size; ++i) s += trace[i * stride + component];
    const double d = s / static_cast<double>(bm.batch_size) - used_mean;
    ss += d * d;
  }
  const double sigma2 = static_cast<double>(bm.batch_size) * ss / static_cast<double>(bm.batches - 1);
  bm.se = std::sqrt(sigma2 / static_cast<double>(n));
  return bm;
}

BatchMeans batch_means(std::span<const double> x) { return batch_means(x, 1, 0); }

namespace {

ChainEstimate finish(const ChainRun& chain) {
  ChainEstimate est;
  for (std::size_t i = 0; i < chain.count(); ++i) {
    const BatchMeans bm = batch_means(chain.trace(), chain.count(), i);
    est.mean.push_back(chain.sums()[i] / static_cast<double>(chain.retained()));
    est.se.push_back(bm.se);
  }
  est.acceptance_rate = chain.acceptance_rate();
  est.max_potential = chain.max_potential();
  est.alpha_bound_violations = chain.alpha_bound_violations();
  est.work = chain.work();
  return est;
}

}  // namespace

ChainEstimate run_estimate(const PotentialFn& potential, std::size_t dimension, const Observables& g, std::size_t M,
                           std::size_t burn_in, std::uint64_t seed, std::uint64_t stream, ForwardCache* cache) {
  if (M == 0) throw std::invalid_argument("run_estimate: M must be positive");
  ChainRun chain(potential, g, {dimension, seed, stream, burn_in, true, false, cache});
  chain.run(burn_in + M);
  return finish(chain);
}

ChainEstimate run_estimate(const PosteriorSpec& spec, const Observables& g, std::size_t M, std::size_t burn_in,
                           std::uint64_t seed, std::uint64_t stream, ForwardCache* cache) {
  if (M == 0) throw std::invalid_argument("run_estimate: M must be positive");
  ChainRun chain(spec, g, {spec.truncation(), seed, stream, burn_in, true, false, cache});
  chain.run(burn_in + M);
  return finish(chain);
}

}  // namespace invert
