#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "invert/forward.hpp"

namespace invert {

/// Invalid or unknown configuration entry; `key` names the offending path.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& what)
      : std::runtime_error(key.empty() ? what : key + ": " + what), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

/// Flat `section.key = value` map. Lines starting with '#' are comments.
class ConfigMap {
 public:
  static ConfigMap parse(const std::string& text, const std::string& source = "<string>");
  static ConfigMap from_file(const std::string& path);

  /// Applies a `section.key=value` override.
  void set(const std::string& assignment);
  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const std::map<std::string, std::string>& values() const noexcept { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

struct ExperimentConfig {
  ProblemSetup problem;
  double sigma = 0.1;
  std::uint64_t data_seed = 1;
  std::vector<double> u_true{0.5, -0.5, 0.25, -0.25};
  int ref_level_offset = 2;

  std::string method = "plain";

  int min_level = 1;
  int max_level = 5;
  double q = 1.0;
  std::size_t J = 0;  // fixed truncation for plain runs, 0 = 2^ceil(l/q) capped at n_modes
  std::size_t M = 1000;
  std::size_t burn_in = 0;
  std::uint64_t mcmc_seed = 1;
  std::size_t replicas = 1;

  std::size_t gpc_J = 4;
  int gpc_l_build = -1;  // -1 = fem.max_level
  std::size_t gpc_quad_order = 8;
  double gpc_degree_cap = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> gpc_N{1, 2, 4, 8, 16, 32, 64};
  double gpc_error_scale = 1.0;  // M_N = scale / err_N^2, clamped
  std::size_t gpc_M_min = 1000;
  std::size_t gpc_M_max = 100000;
  std::size_t gpc_bound_samples = 1000;

  int ml_min_L = 0;
  int ml_L = 4;
  double ml_q = 1.0;
  std::uint64_t ml_master_seed = 1;
  std::size_t ml_replicas = 1;
  double ml_sample_scale = 1.0;

  std::size_t oracle_order = 16;

  std::string out_dir = ".";
  std::string prefix = "invert";
  int threads = 0;
  bool serial = false;
};

/// Validates and converts a ConfigMap; unknown keys are rejected.
ExperimentConfig to_experiment_config(const ConfigMap& map);

/// The documented key list with defaults, in file format.
std::string default_config_text();

}  // namespace invert
