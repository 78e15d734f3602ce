// Acceptance checks. Prints one PASS/FAIL line per criterion; exits nonzero
// only with --strict.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <memory>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "invert/bayes.hpp"
#include "invert/experiments.hpp"
#include "invert/fem.hpp"
#include "invert/gpc.hpp"
#include "invert/mlmcmc.hpp"
#include "invert/oracle.hpp"
#include "invert/sampler.hpp"
#include "invert/selftest.hpp"
#include "invert/stats.hpp"

using namespace invert;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::string join(const std::vector<double>& v, const char* f = "%.3g") {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + fmt(f, v[i]);
  return s;
}

// 1D, s=2, kappa=1, J=2, level 4, sigma=0.1, k=4.
ExperimentConfig canonical() {
  ExperimentConfig c;
  c.min_level = 4;
  c.max_level = 4;
  c.J = 2;
  c.sigma = 0.1;
  return c;
}

constexpr std::size_t kOracleOrder = 16;

std::string criterion1_csv() {
  Experiment e(canonical());
  const PosteriorSpec spec = e.spec(2, 4);
  const Observables g = qoi_of(*spec.model);
  const double oracle = posterior_expectation_quadrature(spec, g, QuadratureGrid(2, kOracleOrder)).mean[0];
  std::ostringstream os;
  os << "seed,estimate,se,oracle,z\n";
  for (std::uint64_t seed = 1; seed <= 8; ++seed) {
    const ChainEstimate est = run_estimate(spec, g, 100000, 0, seed);
    os << fmt("%llu,%.17g,%.17g,%.17g,%.17g\n", static_cast<unsigned long long>(seed), est.mean[0], est.se[0], oracle,
              (est.mean[0] - oracle) / est.se[0]);
  }
  return os.str();
}

std::string first_run_csv;

Outcome criterion1() {
  first_run_csv = criterion1_csv();
  std::istringstream is(first_run_csv);
  std::string line;
  std::getline(is, line);
  double worst = 0.0;
  double oracle = 0.0;
  while (std::getline(is, line)) {
    double seed, est, se, z;
    std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf,%lf", &seed, &est, &se, &oracle, &z);
    worst = std::max(worst, std::abs(z));
  }
  return {worst <= 3.0, fmt("oracle %.10f, max |estimate - oracle| / SE over 8 seeds = %.2f (limit 3)", oracle, worst)};
}

Outcome criterion2() {
  Experiment e(canonical());
  const PosteriorSpec spec = e.spec(2, 4);
  const Observables g = qoi_of(*spec.model);
  const double oracle = posterior_expectation_quadrature(spec, g, QuadratureGrid(2, kOracleOrder)).mean[0];
  const std::vector<double> Ms{1000, 4000, 16000, 64000};
  const std::size_t R = 32;
  std::vector<double> errs;
  for (std::size_t m = 0; m < Ms.size(); ++m) {
    std::vector<double> values(R);
    for_each_index(R, Execution::parallel, [&](std::size_t r) {
      values[r] = run_estimate(spec, g, static_cast<std::size_t>(Ms[m]), 0, 2, 1000 * m + r).mean[0];
    });
    errs.push_back(rmse(values, oracle));
  }
  const RateFit f = fit_rate(Ms, errs);
  const bool pass = std::abs(f.slope + 0.5) <= 0.1 && f.r2 >= 0.9;
  return {pass, fmt("RMSE %s, slope %.3f (target -0.5 +- 0.1), r2 %.3f", join(errs).c_str(), f.slope, f.r2)};
}

Outcome criterion3() {
  constexpr double pi = std::numbers::pi;
  auto run = [&](int dim, int lo, int hi, std::vector<double>& errs) {
    auto field = builtin_field(dim, 2.0, 1.0, 1);
    const std::vector<double> u{0.0};
    std::vector<double> ls;
    for (int l = lo; l <= hi; ++l) {
      FemLevel lvl(dim, l);
      ForwardSolution sol;
      if (dim == 1) {
        sol = solve(lvl, field, u, [&](Point p) { return pi * pi * std::sin(pi * p.x); }, 1e-14);
        errs.push_back(h1_seminorm_error(sol, [&](Point p) { return Point{pi * std::cos(pi * p.x), 0.0}; }));
      } else {
        sol = solve(lvl, field, u, [&](Point p) { return 2 * pi * pi * std::sin(pi * p.x) * std::sin(pi * p.y); },
                    1e-14);
        errs.push_back(h1_seminorm_error(sol, [&](Point p) {
          return Point{pi * std::cos(pi * p.x) * std::sin(pi * p.y), pi * std::sin(pi * p.x) * std::cos(pi * p.y)};
        }));
      }
      ls.push_back(l);
    }
    return -fit_rate_log2x(ls, errs).slope;
  };
  std::vector<double> e1, e2;
  const double r1 = run(1, 2, 7, e1);
  const double r2 = run(2, 2, 5, e2);
  auto halves = [](const std::vector<double>& e) {
    for (std::size_t i = 1; i < e.size(); ++i) {
      const double ratio = e[i - 1] / e[i];
      if (ratio < 1.8 || ratio > 2.2) return false;
    }
    return true;
  };
  const bool pass = std::abs(r1 - 1.0) <= 0.1 && std::abs(r2 - 1.0) <= 0.1 && halves(e1) && halves(e2);
  return {pass, fmt("1D rate %.3f, 2D rate %.3f (target 1 +- 0.1); per-level ratios in [1.8, 2.2]: %s", r1, r2,
                    halves(e1) && halves(e2) ? "yes" : "no")};
}

Outcome criterion4() {
  auto field = builtin_field(1, 2.0, 1.0, 64);
  FemLevel lvl(1, 10);
  const std::vector<double> u(64, 1.0);
  const auto one = [](Point) { return 1.0; };
  const ForwardSolution ref = solve(lvl, field, u, one, 1e-12);
  std::vector<double> Js{2, 4, 8, 16}, errs;
  for (double J : Js) {
    const ForwardSolution s = solve(lvl, field, std::span<const double>(u.data(), static_cast<std::size_t>(J)), one, 1e-12);
    errs.push_back(h1_seminorm_error(s, ref));
  }
  const RateFit f = fit_rate(Js, errs);
  return {std::abs(f.slope + 1.0) <= 0.25,
          fmt("|P^J - P^64|_V %s, slope %.3f (target -1 +- 0.25)", join(errs).c_str(), f.slope)};
}

Outcome criterion5() {
  ExperimentConfig c = canonical();
  c.min_level = 1;
  c.max_level = 5;
  Experiment e(c);
  const PosteriorSpec ref = e.spec(2, 9);
  std::vector<double> ls, d;
  for (int l = 1; l <= 5; ++l) {
    ls.push_back(l);
    d.push_back(hellinger_quadrature(e.spec(2, l), ref, kOracleOrder).distance);
  }
  const RateFit f = fit_rate_log2x(ls, d);
  return {std::abs(f.slope + 1.0) <= 0.25,
          fmt("d_Hell %s, slope %.3f (target -1 +- 0.25), r2 %.3f", join(d).c_str(), f.slope, f.r2)};
}

Outcome criterion6() {
  Experiment e(canonical());
  const PosteriorSpec spec = e.spec(2, 4);
  ChainRun chain(spec, qoi_of(*spec.model), {.dimension = 2, .seed = 6, .keep_states = true});
  chain.record_alphas(true);
  chain.run(10000);
  const auto s = chain.state_trace();
  std::vector<double> moved;
  for (std::size_t i = 1; i < s.size() / 2; ++i) {
    moved.push_back(s[2 * i] != s[2 * (i - 1)] || s[2 * i + 1] != s[2 * (i - 1) + 1] ? 1.0 : 0.0);
  }
  const BatchMeans bm = batch_means(moved);
  const double floor = std::exp(-chain.max_potential());
  const bool pass = chain.alpha_bound_violations() == 0 && chain.acceptance_rate() >= floor - 3.0 * bm.se;
  return {pass, fmt("alpha < exp(-Phi(v)) in %llu of %zu steps; acceptance %.4f (SE %.4f) vs exp(-max Phi) = %.4f",
                    static_cast<unsigned long long>(chain.alpha_bound_violations()), chain.alphas().size(),
                    chain.acceptance_rate(), bm.se, floor)};
}

Outcome criterion7() {
  ExperimentConfig c;
  c.method = "gpc";
  c.max_level = 5;
  c.gpc_J = 4;
  c.gpc_quad_order = 8;
  c.gpc_N = {1, 2, 4, 8, 16, 32, 64, 4096};
  c.gpc_M_min = 100000;
  c.gpc_M_max = 100000;
  c.oracle_order = 12;
  Experiment e(c);
  ExperimentResult res = e.run_gpc();
  std::vector<double> Ns, errs;
  bool monotone = true;
  for (std::size_t i = 0; i < res.records.size(); ++i) {
    const auto& r = res.records[i];
    if (i > 0 && r.surrogate_error > res.records[i - 1].surrogate_error) monotone = false;
    if (r.value <= 64) {
      Ns.push_back(r.value);
      errs.push_back(r.surrogate_error);
    }
  }
  const RateFit f = fit_rate(Ns, errs);
  const double limit = -(c.problem.s - 0.5) + 0.3;
  const auto& full = res.records.back();
  const double plain = res.extras["plain_estimate"];
  const double combined = std::sqrt(full.se * full.se + res.extras["plain_se"] * res.extras["plain_se"]);
  const double z = std::abs(full.estimate - plain) / combined;
  const bool pass = z <= 3.0 && monotone && f.slope <= limit;
  return {pass, fmt("full N=%g: gpc %.6f vs plain %.6f, |diff|/combined SE %.2f (limit 3); L2 error %s, monotone %s, "
                    "slope %.3f (limit %.2f)",
                    full.value, full.estimate, plain, z, join(errs).c_str(), monotone ? "yes" : "no", f.slope, limit)};
}

Outcome criterion8() {
  ExperimentConfig c = canonical();
  c.method = "mlmcmc";
  c.ml_L = 2;
  Experiment e(c);
  const MlmcmcProblem p{&e.family(), e.likelihood()};
  double worst = 0.0;
  std::string detail;
  for (int L : {1, 2}) {
    for (double q : {1.0, 2.0}) {
      const MlmcmcSchedule s = make_schedule(L, q, 1, 2, true);
      const double sum = quadrature_terms(p, s, 20).sum;
      const double direct = quadrature_level_expectation(p, s, L, L, 20);
      worst = std::max(worst, std::abs(sum - direct));
      detail += fmt("L=%d q=%g diff %.1e; ", L, q, sum - direct);
    }
  }
  return {worst <= 1e-8, detail + fmt("max %.2e (limit 1e-8)", worst)};
}

Outcome criterion9() {
  ExperimentConfig c;
  c.method = "mlmcmc";
  c.ml_L = 4;
  Experiment e(c);
  const MlmcmcProblem p{&e.family(), e.likelihood()};
  const MlmcmcSchedule sched = e.schedule(4);
  struct Key {
    int l, lp;
  };
  std::vector<Key> keys;
  for (int l = 1; l <= 4; ++l) {
    for (int lp = 0; lp <= 4 - l; ++lp) keys.push_back({l, lp});
  }
  std::vector<double> var(keys.size());
  for_each_index(keys.size(), Execution::parallel, [&](std::size_t i) {
    var[i] = level_difference_term(p, sched, keys[i].l, keys[i].lp, 0, 4096).variance;
  });
  std::vector<double> x;
  for (const auto& k : keys) x.push_back(k.l + k.lp);
  const RateFit f = fit_rate_log2x(x, var);
  const bool pass = f.slope >= -2.6 && f.slope <= -1.4 && f.r2 >= 0.85;
  return {pass, fmt("%zu terms with l >= 1, slope %.3f (target [-2.6, -1.4]), r2 %.3f (min 0.85)", keys.size(), f.slope,
                    f.r2)};
}

ExperimentConfig hierarchy(std::size_t replicas) {
  ExperimentConfig c;
  c.problem.n_modes = 4;
  c.oracle_order = 12;
  c.replicas = replicas;
  c.ml_replicas = replicas;
  c.ml_sample_scale = 1.0;
  return c;
}

Outcome criterion10() {
  ExperimentConfig c = hierarchy(32);
  c.method = "mlmcmc";
  c.ml_min_L = 1;
  c.ml_L = 4;
  Experiment e(c);
  const ExperimentResult res = e.run_mlmcmc();
  std::vector<double> errs, scaled;
  for (const auto& r : res.records) {
    errs.push_back(r.rmse);
    scaled.push_back(r.rmse * std::pow(2.0, r.value) / (r.value * r.value));
  }
  const double hi = *std::max_element(scaled.begin(), scaled.end());
  const double lo = *std::min_element(scaled.begin(), scaled.end());
  return {hi <= 3.0 * lo, fmt("RMSE %s, RMSE 2^L/L^2 %s, max/min %.2f (limit 3)", join(errs).c_str(),
                              join(scaled).c_str(), hi / lo)};
}

constexpr int kComplexityMaxLevel = 7;
constexpr int kComplexityFitFrom = 3;  // coarser levels are preasymptotic for the multilevel estimator

Outcome criterion11() {
  ExperimentConfig c = hierarchy(32);
  c.min_level = 1;
  c.max_level = kComplexityMaxLevel;
  c.M = 4;  // 4^l samples at level l, matching M_{00} = 4^L of the multilevel run
  c.ml_min_L = 1;
  c.ml_L = kComplexityMaxLevel;
  ExperimentConfig ml = c;
  ml.method = "mlmcmc";
  Experiment pe(c), me(ml);
  const auto plain = pe.run_plain().records;
  const auto multi = me.run_mlmcmc().records;
  auto window = [](const std::vector<WorkErrorRecord>& r) {
    std::vector<WorkErrorRecord> w;
    for (const auto& x : r) {
      if (x.value >= kComplexityFitFrom) w.push_back(x);
    }
    return w;
  };
  const RateFit fp = flops_vs_rmse(window(plain));
  const RateFit fm = flops_vs_rmse(window(multi));
  const RateFit ap = flops_vs_rmse(plain);
  const RateFit am = flops_vs_rmse(multi);
  const bool pass = std::abs(fp.slope) >= std::abs(fm.slope) + 1.0 && fp.r2 >= 0.85 && fm.r2 >= 0.85;
  return {pass, fmt("levels %d..%d: plain slope %.3f (r2 %.3f), MLMCMC slope %.3f (r2 %.3f), need |plain| >= |ml| + 1; "
                    "all levels 1..%d: plain %.3f, MLMCMC %.3f",
                    kComplexityFitFrom, kComplexityMaxLevel, fp.slope, fp.r2, fm.slope, fm.r2, kComplexityMaxLevel,
                    ap.slope, am.slope)};
}

Outcome criterion12() {
  const std::string a = selftest_csv(run_selftest());
  const std::string b = selftest_csv(run_selftest());
  if (first_run_csv.empty()) first_run_csv = criterion1_csv();
  const std::string second = criterion1_csv();
  const bool pass = a == b && first_run_csv == second;
  return {pass, fmt("selftest CSV identical: %s (%zu bytes); criterion-1 CSV identical: %s (%zu bytes)",
                    a == b ? "yes" : "no", a.size(), first_run_csv == second ? "yes" : "no", second.size())};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance checks"};
  std::vector<int> only;
  bool strict = false;
  app.add_option("--only", only, "run only these criteria")->check(CLI::Range(1, 12));
  app.add_flag("--strict", strict, "exit nonzero if any criterion fails");
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"oracle equivalence", criterion1},     {"Monte Carlo rate", criterion2},
      {"FEM rate", criterion3},               {"truncation rate", criterion4},
      {"Hellinger rate", criterion5},         {"acceptance lower bound", criterion6},
      {"gpc agreement", criterion7},          {"telescoping identity", criterion8},
      {"variance decay", criterion9},         {"MLMCMC error scaling", criterion10},
      {"complexity slopes", criterion11},     {"determinism", criterion12},
  };
  const std::set<int> selected(only.begin(), only.end());
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int n = static_cast<int>(i + 1);
    if (!selected.empty() && !selected.count(n)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!o.pass) ++failures;
    std::printf("criterion %2d %-24s %s  %s [%.1f s]\n", n, criteria[i].first.c_str(), o.pass ? "PASS" : "FAIL",
                o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return strict && failures > 0 ? 1 : 0;
}
