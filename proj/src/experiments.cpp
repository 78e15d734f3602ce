#include "invert/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "invert/gpc.hpp"
#include "invert/oracle.hpp"
#include "invert/quadrature.hpp"
#include "invert/sampler.hpp"

namespace invert {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void accumulate_work(WorkErrorRecord& rec, const Work& w, std::size_t replicas) {
  const double r = static_cast<double>(replicas);
  rec.ndof += static_cast<double>(w.ndof) / r;
  rec.flops += w.flops / r;
  rec.solves += static_cast<double>(w.solves) / r;
}

}  // namespace

std::uint64_t plain_stream(std::size_t replica) { return MlmcmcSchedule::stream(replica, 0, 0, 0); }

Experiment::Experiment(ExperimentConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.threads > 0) set_threads(cfg_.threads);
  family_ = std::make_unique<ModelFamily>(cfg_.problem);

  int finest = cfg_.max_level;
  if (cfg_.method == "gpc") {
    finest = cfg_.gpc_l_build < 0 ? cfg_.max_level : cfg_.gpc_l_build;
    ref_J_ = cfg_.gpc_J;
  } else if (cfg_.method == "mlmcmc") {
    finest = cfg_.ml_L;
    ref_J_ = schedule(cfg_.ml_L).dimension();
  } else {
    for (int l = cfg_.min_level; l <= cfg_.max_level; ++l) ref_J_ = std::max(ref_J_, plain_J(l));
  }
  ref_level_ = finest + cfg_.ref_level_offset;

  std::vector<double> u(ref_J_, 0.0);
  for (std::size_t j = 0; j < std::min(u.size(), cfg_.u_true.size()); ++j) u[j] = cfg_.u_true[j];
  const NoiseModel noise = NoiseModel::isotropic(cfg_.problem.n_observations, cfg_.sigma);
  auto lik = std::make_shared<Likelihood>(Likelihood{{}, noise});
  lik->data = synthesize_data(family_->forward(ref_J_, ref_level_), u, noise, cfg_.data_seed);
  likelihood_ = std::move(lik);
}

std::size_t Experiment::plain_J(int l) const {
  if (cfg_.J > 0) return cfg_.J;
  const double e = std::ceil(static_cast<double>(l) / cfg_.q - 1e-12);
  return std::min(static_cast<std::size_t>(std::ldexp(1.0, static_cast<int>(e))), cfg_.problem.n_modes);
}

PosteriorSpec Experiment::spec(std::size_t J, int l) const { return {&family_->forward(J, l), likelihood_}; }

MlmcmcSchedule Experiment::schedule(int L) const {
  MlmcmcSchedule s = make_schedule(L, cfg_.ml_q, cfg_.ml_master_seed, cfg_.problem.n_modes);
  s.sample_scale = cfg_.ml_sample_scale;
  return s;
}

double Experiment::truth() {
  if (have_truth_) return truth_;
  if (ref_J_ > kMaxQuadratureDims) {
    throw ConfigError("field.n_modes", "reference truncation J* = " + std::to_string(ref_J_) +
                                           " exceeds the quadrature oracle limit of " +
                                           std::to_string(kMaxQuadratureDims) + "; lower field.n_modes or raise q");
  }
  const PosteriorSpec s = spec(ref_J_, ref_level_);
  const QuadratureGrid grid(ref_J_, cfg_.oracle_order);
  const auto e = posterior_expectation_quadrature(s, qoi_of(*s.model), grid, nullptr, exec());
  truth_ = e.mean[0];
  truth_work_ = e.work;
  have_truth_ = true;
  return truth_;
}

ExperimentResult Experiment::run_plain() {
  const auto t0 = Clock::now();
  ExperimentResult res;
  res.method = "plain";
  res.truth = truth();
  res.ref_J = ref_J_;
  res.ref_level = ref_level_;
  res.total += truth_work_;
  const std::size_t R = cfg_.replicas;
  for (int l = cfg_.min_level; l <= cfg_.max_level; ++l) {
    const auto t1 = Clock::now();
    const std::size_t J = plain_J(l);
    const std::size_t M = cfg_.M << (2 * (l - cfg_.min_level));
    const PosteriorSpec s = spec(J, l);
    const Observables g = qoi_of(*s.model);
    std::vector<ChainEstimate> est(R);
    for_each_index(R, exec(), [&](std::size_t r) {
      est[r] = run_estimate(s, g, M, cfg_.burn_in, cfg_.mcmc_seed, plain_stream(r));
    });
    WorkErrorRecord rec{"plain", "l", static_cast<double>(l), J, l, M, R};
    std::vector<double> values;
    for (const auto& e : est) {
      values.push_back(e.mean[0]);
      rec.se += e.se[0] / static_cast<double>(R);
      rec.acceptance += e.acceptance_rate / static_cast<double>(R);
      accumulate_work(rec, e.work, R);
      res.total += e.work;
    }
    rec.estimate = mean(values);
    rec.rmse = rmse(values, res.truth);
    rec.bias = rec.estimate - res.truth;
    rec.wall_seconds = seconds_since(t1);
    res.records.push_back(rec);
  }
  res.wall_seconds = seconds_since(t0);
  return res;
}

ExperimentResult Experiment::run_mlmcmc() {
  const auto t0 = Clock::now();
  ExperimentResult res;
  res.method = "mlmcmc";
  res.truth = truth();
  res.ref_J = ref_J_;
  res.ref_level = ref_level_;
  res.total += truth_work_;
  const std::size_t R = cfg_.ml_replicas;
  const MlmcmcProblem problem{family_.get(), likelihood_};
  for (int L = cfg_.ml_min_L; L <= cfg_.ml_L; ++L) {
    const auto t1 = Clock::now();
    const MlmcmcSchedule sched = schedule(L);
    std::vector<MlmcmcResult> runs(R);
    const Execution inner = R > 1 ? Execution::serial : exec();
    for_each_index(R, exec(), [&](std::size_t r) { runs[r] = estimate(problem, sched, r, inner); });
    WorkErrorRecord rec{"mlmcmc", "L", static_cast<double>(L), sched.J.back(), L, sched.M(0, 0), R};
    std::vector<double> values;
    for (std::size_t r = 0; r < R; ++r) {
      values.push_back(runs[r].estimate);
      accumulate_work(rec, runs[r].work, R);
      rec.clamps += runs[r].clamps;
      res.total += runs[r].work;
      for (const auto& t : runs[r].terms) res.terms.push_back({r, L, t});
    }
    rec.estimate = mean(values);
    rec.se = R > 1 ? std::sqrt(variance(values)) : std::nan("");
    rec.rmse = rmse(values, res.truth);
    rec.bias = rec.estimate - res.truth;
    rec.wall_seconds = seconds_since(t1);
    res.records.push_back(rec);
  }
  res.wall_seconds = seconds_since(t0);
  return res;
}

ExperimentResult Experiment::run_gpc() {
  const auto t0 = Clock::now();
  ExperimentResult res;
  res.method = "gpc";
  res.truth = truth();
  res.ref_J = ref_J_;
  res.ref_level = ref_level_;
  res.total += truth_work_;

  const int l_build = cfg_.gpc_l_build < 0 ? cfg_.max_level : cfg_.gpc_l_build;
  const FemForward& fem = family_->forward(cfg_.gpc_J, l_build);
  GpcOptions opts;
  opts.quad_order = cfg_.gpc_quad_order;
  opts.degree_cap = cfg_.gpc_degree_cap;
  ForwardCache cache;
  const GpcSurrogate full = build_surrogate(fem, l_build, opts, exec(), &cache);
  res.total += full.build_work();
  res.extras["candidates"] = static_cast<double>(full.candidates());
  res.extras["build_flops"] = full.build_work().flops;
  res.extras["build_solves"] = static_cast<double>(full.build_work().solves);
  res.extras["total_energy"] = full.total_energy();
  res.extras["candidate_energy"] = full.candidate_energy();

  const double bound = estimate_qoi_bound(fem, cfg_.gpc_bound_samples, cfg_.mcmc_seed, exec());
  res.extras["qoi_bound"] = bound;
  const std::size_t R = cfg_.replicas;
  std::size_t M_largest = 0;
  std::uint64_t total_clamps = 0;

  for (std::size_t N : cfg_.gpc_N) {
    const auto t1 = Clock::now();
    auto sN = std::make_shared<const GpcSurrogate>(full.truncated(N));
    const double err = surrogate_l2_error(*sN, fem, cfg_.oracle_order, exec(), &cache);
    const double m_target = std::ceil(cfg_.gpc_error_scale / std::max(err * err, 1e-300));
    const auto M = static_cast<std::size_t>(
        std::clamp(m_target, static_cast<double>(cfg_.gpc_M_min), static_cast<double>(cfg_.gpc_M_max)));
    M_largest = std::max(M_largest, M);
    const SurrogateForward model(sN);
    const QoiCutoff cutoff(bound);
    const PosteriorSpec s{&model, likelihood_};
    const Observables g = qoi_cutoff(model, cutoff);
    std::vector<ChainEstimate> est(R);
    for_each_index(R, exec(), [&](std::size_t r) {
      est[r] = run_estimate(s, g, M, cfg_.burn_in, cfg_.mcmc_seed, plain_stream(r));
    });
    WorkErrorRecord rec{"gpc", "N", static_cast<double>(sN->size()), cfg_.gpc_J, l_build, M, R};
    std::vector<double> values;
    for (const auto& e : est) {
      values.push_back(e.mean[0]);
      rec.se += e.se[0] / static_cast<double>(R);
      rec.acceptance += e.acceptance_rate / static_cast<double>(R);
      accumulate_work(rec, e.work, R);
      res.total += e.work;
    }
    rec.estimate = mean(values);
    rec.rmse = rmse(values, res.truth);
    rec.bias = rec.estimate - res.truth;
    rec.clamps = cutoff.clamps();
    rec.surrogate_error = err;
    rec.build_flops = full.build_work().flops;
    rec.wall_seconds = seconds_since(t1);
    total_clamps += rec.clamps;
    res.records.push_back(rec);
  }
  res.extras["clamps"] = static_cast<double>(total_clamps);
  std::vector<double> ns;
  std::vector<double> errs;
  for (const auto& r : res.records) {
    if (r.surrogate_error > 0.0 && r.value < static_cast<double>(full.size())) {
      ns.push_back(r.value);
      errs.push_back(r.surrogate_error);
    }
  }
  if (ns.size() >= 3) {
    try {
      res.extras["tau"] = -fit_rate(ns, errs).slope;  // error ~ N^{-tau}
    } catch (const std::invalid_argument&) {
    }
  }

  // Plain chain on the build discretization for comparison of estimates and per-step cost.
  const PosteriorSpec ps = spec(cfg_.gpc_J, l_build);
  std::vector<ChainEstimate> plain(R);
  for_each_index(R, exec(), [&](std::size_t r) {
    plain[r] = run_estimate(ps, qoi_of(fem), M_largest, cfg_.burn_in, cfg_.mcmc_seed + 1, plain_stream(r));
  });
  std::vector<double> pv;
  double pse = 0.0;
  double pflops = 0.0;
  for (const auto& e : plain) {
    pv.push_back(e.mean[0]);
    pse += e.se[0] / static_cast<double>(R);
    pflops += e.work.flops;
    res.total += e.work;
  }
  res.extras["plain_estimate"] = mean(pv);
  res.extras["plain_se"] = pse;
  res.extras["plain_flops_per_step"] = pflops / static_cast<double>(R * (M_largest + 1));
  const auto& last = res.records.back();
  res.extras["gpc_flops_per_step"] = last.flops / static_cast<double>(last.M + 1);
  res.wall_seconds = seconds_since(t0);
  return res;
}

ExperimentResult Experiment::run_oracle() {
  const auto t0 = Clock::now();
  ExperimentResult res;
  res.method = "oracle";
  res.truth = truth();
  res.ref_J = ref_J_;
  res.ref_level = ref_level_;
  res.total += truth_work_;
  for (int l = cfg_.min_level; l <= cfg_.max_level; ++l) {
    const auto t1 = Clock::now();
    const std::size_t J = plain_J(l);
    if (J > kMaxQuadratureDims) throw ConfigError("mcmc.J", "oracle needs J <= 4");
    const PosteriorSpec s = spec(J, l);
    const QuadratureGrid grid(J, cfg_.oracle_order);
    const auto e = posterior_expectation_quadrature(s, qoi_of(*s.model), grid, nullptr, exec());
    WorkErrorRecord rec{"oracle", "l", static_cast<double>(l), J, l, grid.size(), 1};
    rec.estimate = e.mean[0];
    rec.rmse = std::abs(e.mean[0] - res.truth);
    rec.bias = e.mean[0] - res.truth;
    accumulate_work(rec, e.work, 1);
    res.total += e.work;
    rec.wall_seconds = seconds_since(t1);
    res.records.push_back(rec);
    res.extras["Z_l" + std::to_string(l)] = e.z;
  }
  res.wall_seconds = seconds_since(t0);
  return res;
}

ExperimentResult Experiment::run() {
  if (cfg_.method == "plain") return run_plain();
  if (cfg_.method == "gpc") return run_gpc();
  if (cfg_.method == "mlmcmc") return run_mlmcmc();
  return run_oracle();
}

RateFit flops_vs_rmse(const std::vector<WorkErrorRecord>& records) {
  std::vector<double> x;
  std::vector<double> y;
  for (const auto& r : records) {
    x.push_back(r.rmse);
    y.push_back(r.flops);
  }
  return fit_rate(x, y);
}

std::string records_csv(const std::vector<WorkErrorRecord>& records) {
  std::ostringstream os;
  os << "method,knob,value,J,level,M,replicas,estimate,se,rmse,bias,ndof,flops,solves,acceptance,clamps,"
        "surrogate_error,build_flops\n";
  for (const auto& r : records) {
    os << r.method << ',' << r.knob << ',' << fmt(r.value) << ',' << r.J << ',' << r.level << ',' << r.M << ','
       << r.replicas << ',' << fmt(r.estimate) << ',' << fmt(r.se) << ',' << fmt(r.rmse) << ',' << fmt(r.bias) << ','
       << fmt(r.ndof) << ',' << fmt(r.flops) << ',' << fmt(r.solves) << ',' << fmt(r.acceptance) << ',' << r.clamps
       << ',' << fmt(r.surrogate_error) << ',' << fmt(r.build_flops) << '\n';
  }
  return os.str();
}

std::string terms_csv(const std::vector<TermRow>& terms) {
  std::ostringstream os;
  os << "replica,L,l,lp,M,A,B,C,contribution,var,ndof,flops\n";
  for (const auto& row : terms) {
    const auto& t = row.term;
    os << row.replica << ',' << row.L << ',' << t.l << ',' << t.lp << ',' << t.M << ',' << fmt(t.A) << ','
       << fmt(t.B) << ',' << fmt(t.C) << ',' << fmt(t.contribution) << ',' << fmt(t.variance) << ',' << t.work.ndof
       << ',' << fmt(t.work.flops) << '\n';
  }
  return os.str();
}

std::string summary_json(const ExperimentConfig& cfg, const ExperimentResult& res) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["method"] = res.method;
  j["problem"] = {{"dim", cfg.problem.dim},           {"s", cfg.problem.s},
                  {"kappa", cfg.problem.kappa},       {"n_modes", cfg.problem.n_modes},
                  {"k", cfg.problem.n_observations}, {"sigma", cfg.sigma},
                  {"cg_tol_factor", cfg.problem.cg_tol_factor}};
  j["reference"] = {{"J", res.ref_J}, {"level", res.ref_level}, {"truth", res.truth}};
  j["total"] = {{"solves", res.total.solves}, {"ndof", res.total.ndof}, {"flops", res.total.flops}};
  j["wall_seconds"] = res.wall_seconds;
  std::vector<int> levels;
  for (const auto& r : res.records) levels.push_back(r.level);
  for (const auto& t : res.terms) levels.push_back(t.term.l);
  std::sort(levels.begin(), levels.end());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
  ordered_json meshes = ordered_json::array();
  for (int l : levels) {
    const FemLevel lvl(cfg.problem.dim, l);
    meshes.push_back({{"level", l}, {"h", lvl.h()}, {"ndof", lvl.n_dof()}, {"nnz", lvl.pattern().nnz()}});
  }
  j["meshes"] = meshes;
  ordered_json recs = ordered_json::array();
  for (const auto& r : res.records) {
    recs.push_back({{"knob", r.knob},   {"value", r.value}, {"J", r.J},         {"level", r.level},
                    {"M", r.M},         {"estimate", r.estimate}, {"se", r.se}, {"rmse", r.rmse},
                    {"flops", r.flops}, {"ndof", r.ndof},   {"clamps", r.clamps}, {"wall_seconds", r.wall_seconds}});
  }
  j["records"] = recs;
  for (const auto& [k, v] : res.extras) j["extras"][k] = v;
  if (res.records.size() >= 3) {
    try {
      const RateFit f = flops_vs_rmse(res.records);
      j["fit_flops_vs_rmse"] = {{"slope", f.slope}, {"intercept", f.intercept}, {"r2", f.r2}};
    } catch (const std::exception&) {
      j["fit_flops_vs_rmse"] = nullptr;
    }
  }
  return j.dump(2) + "\n";
}

std::vector<std::string> write_outputs(const ExperimentConfig& cfg, const ExperimentResult& res) {
  namespace fs = std::filesystem;
  fs::create_directories(cfg.out_dir);
  const fs::path base = fs::path(cfg.out_dir) / (cfg.prefix + "_" + res.method);
  std::vector<std::string> written;
  auto put = [&](const fs::path& p, const std::string& text) {
    std::ofstream os(p, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + p.string());
    os << text;
    written.push_back(p.string());
  };
  put(base.string() + ".csv", records_csv(res.records));
  if (!res.terms.empty()) put(base.string() + "_terms.csv", terms_csv(res.terms));
  put(base.string() + ".json", summary_json(cfg, res));
  std::ostringstream by_flops;
  std::ostringstream by_knob;
  by_flops << "# flops rmse\n";
  by_knob << "# " << (res.records.empty() ? "knob" : res.records.front().knob) << " rmse\n";
  for (const auto& r : res.records) {
    by_flops << fmt(r.flops) << ' ' << fmt(r.rmse) << '\n';
    by_knob << fmt(r.value) << ' ' << fmt(r.rmse) << '\n';
  }
  put(base.string() + "_rmse_vs_flops.dat", by_flops.str());
  put(base.string() + "_rmse_vs_knob.dat", by_knob.str());
  return written;
}

RateFit rates_from_csv(const std::string& path, const std::string& x, const std::string& y) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path);
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error(path + ": empty file");
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  auto column = [&](const std::string& name) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw std::invalid_argument(path + ": no column named '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t cx = column(x);
  const std::size_t cy = column(y);
  std::vector<double> xs;
  std::vector<double> ys;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() <= std::max(cx, cy)) throw std::runtime_error(path + ": short row");
    xs.push_back(std::stod(cells[cx]));
    ys.push_back(std::stod(cells[cy]));
  }
  return fit_rate(xs, ys);
}

}  // namespace invert
