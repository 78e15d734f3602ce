#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "invert/bayes.hpp"
#include "invert/config.hpp"
#include "invert/forward.hpp"
#include "invert/mlmcmc.hpp"
#include "invert/parallel.hpp"
#include "invert/stats.hpp"

namespace invert {

/// One point of an error-vs-work series. Work columns are per estimator run
/// (averaged over replicas); totals live in ExperimentResult.
struct WorkErrorRecord {
  std::string method;
  std::string knob;
  double value = 0.0;
  std::size_t J = 0;
  int level = 0;
  std::size_t M = 0;
  std::size_t replicas = 0;
  double estimate = 0.0;
  double se = 0.0;
  double rmse = 0.0;
  double bias = 0.0;
  double ndof = 0.0;
  double flops = 0.0;
  double solves = 0.0;
  double acceptance = 0.0;
  std::uint64_t clamps = 0;
  double surrogate_error = 0.0;
  double build_flops = 0.0;
  double wall_seconds = 0.0;
};

struct TermRow {
  std::size_t replica = 0;
  int L = 0;
  LevelDifferenceTerm term;
};

struct ExperimentResult {
  std::string method;
  double truth = 0.0;
  std::size_t ref_J = 0;
  int ref_level = 0;
  std::vector<WorkErrorRecord> records;
  std::vector<TermRow> terms;
  std::map<std::string, double> extras;
  Work total;  // every solve of the run, including build and oracle work
  double wall_seconds = 0.0;
};

/// Problem instance for one configuration: coefficient field, synthetic
/// data at the reference discretization, and the oracle value used as truth.
class Experiment {
 public:
  explicit Experiment(ExperimentConfig cfg);

  const ExperimentConfig& config() const noexcept { return cfg_; }
  const ModelFamily& family() const noexcept { return *family_; }
  std::shared_ptr<const Likelihood> likelihood() const noexcept { return likelihood_; }
  const std::vector<double>& data() const noexcept { return likelihood_->data; }
  Execution exec() const noexcept { return cfg_.serial ? Execution::serial : Execution::parallel; }

  /// Truncation used by plain runs at level l.
  std::size_t plain_J(int l) const;
  std::size_t ref_J() const noexcept { return ref_J_; }
  int ref_level() const noexcept { return ref_level_; }
  PosteriorSpec spec(std::size_t J, int l) const;
  MlmcmcSchedule schedule(int L) const;

  /// E[l(P)] under the reference posterior, by tensor quadrature (cached).
  double truth();

  ExperimentResult run_plain();
  ExperimentResult run_gpc();
  ExperimentResult run_mlmcmc();
  ExperimentResult run_oracle();
  ExperimentResult run();

 private:
  ExperimentConfig cfg_;
  std::unique_ptr<ModelFamily> family_;
  std::shared_ptr<const Likelihood> likelihood_;
  std::size_t ref_J_ = 0;
  int ref_level_ = 0;
  bool have_truth_ = false;
  double truth_ = 0.0;
  Work truth_work_;
};

/// Stream id of replica r of a plain run; matches the (0, 0) MLMCMC term.
std::uint64_t plain_stream(std::size_t replica);

/// Fit of log2 flops against log2 rmse over the records.
RateFit flops_vs_rmse(const std::vector<WorkErrorRecord>& records);

std::string records_csv(const std::vector<WorkErrorRecord>& records);
std::string terms_csv(const std::vector<TermRow>& terms);
std::string summary_json(const ExperimentConfig& cfg, const ExperimentResult& res);

/// Writes <prefix>_<method>.csv, _terms.csv (MLMCMC), .json and two-column
/// plot files into cfg.out_dir. Returns the paths written.
std::vector<std::string> write_outputs(const ExperimentConfig& cfg, const ExperimentResult& res);

/// Reads a records CSV and fits log2(y) against log2(x) for the named columns.
RateFit rates_from_csv(const std::string& path, const std::string& x, const std::string& y);

}  // namespace invert
