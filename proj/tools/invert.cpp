// invert: command-line driver for the plain, gpc and multilevel MCMC experiments.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "invert/config.hpp"
#include "invert/experiments.hpp"
#include "invert/fem.hpp"
#include "invert/sampler.hpp"
#include "invert/selftest.hpp"

namespace {

constexpr int kConfigError = 2;
constexpr int kNumericalError = 3;

invert::ExperimentConfig load(const std::string& path, const std::vector<std::string>& overrides,
                              const std::string& method) {
  invert::ConfigMap map = invert::ConfigMap::from_file(path);
  for (const auto& o : overrides) map.set(o);
  if (!method.empty()) map.set("run.method", method);
  return invert::to_experiment_config(map);
}

void print_records(const invert::ExperimentResult& res) {
  std::printf("method %s  reference (J=%zu, l=%d)  truth %.10g\n", res.method.c_str(), res.ref_J, res.ref_level,
              res.truth);
  std::printf("%6s %6s %4s %9s %16s %12s %12s %14s\n", "knob", "value", "J", "M", "estimate", "se", "rmse", "flops");
  for (const auto& r : res.records) {
    std::printf("%6s %6g %4zu %9zu %16.10g %12.4e %12.4e %14.6e\n", r.knob.c_str(), r.value, r.J, r.M, r.estimate,
                r.se, r.rmse, r.flops);
  }
}

int run_experiment(const invert::ExperimentConfig& cfg) {
  invert::Experiment exp(cfg);
  const invert::ExperimentResult res = exp.run();
  print_records(res);
  for (const auto& p : invert::write_outputs(cfg, res)) std::printf("wrote %s\n", p.c_str());
  return 0;
}

int selftest(const std::string& out) {
  const auto cases = invert::run_selftest();
  int failed = 0;
  for (const auto& c : cases) {
    std::printf("%-32s %s\n", c.name.c_str(), c.pass ? "ok" : "FAIL");
    if (!c.pass) ++failed;
  }
  if (!out.empty()) {
    const std::filesystem::path p(out);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream os(out, std::ios::binary);
    os << invert::selftest_csv(cases);
  }
  std::printf("%zu checks, %d failed\n", cases.size(), failed);
  return failed == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian inversion of a parametric diffusion coefficient with plain, gpc-surrogate and multilevel MCMC"};
  app.require_subcommand(1);

  std::string config_path;
  std::string method;
  std::vector<std::string> overrides;
  auto* run = app.add_subcommand("run", "Run the experiment described by a config file");
  run->add_option("config", config_path, "Config file (section.key = value lines)")->required();
  run->add_option("--method", method, "Override run.method")
      ->check(CLI::IsMember({"plain", "gpc", "mlmcmc", "oracle"}));
  run->add_option("--set", overrides, "Override a key, e.g. --set noise.sigma=0.05");

  auto* oracle = app.add_subcommand("oracle", "Quadrature reference values for each level of the config");
  oracle->add_option("config", config_path, "Config file")->required();
  oracle->add_option("--set", overrides, "Override a key");

  std::string csv_path;
  std::string x_col = "flops";
  std::string y_col = "rmse";
  auto* rates = app.add_subcommand("rates", "Fit log2(y) against log2(x) from a records CSV");
  rates->add_option("csv", csv_path, "Records CSV written by 'run'")->required();
  rates->add_option("--x", x_col, "Column for x")->capture_default_str();
  rates->add_option("--y", y_col, "Column for y")->capture_default_str();

  std::string selftest_out;
  auto* self = app.add_subcommand("selftest", "Run the closed-form sanity checks");
  self->add_option("--out", selftest_out, "Write the results CSV here");

  auto* defaults = app.add_subcommand("defaults", "Print a config file with every key at its default");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kConfigError;
  }

  try {
    if (*run) return run_experiment(load(config_path, overrides, method));
    if (*oracle) return run_experiment(load(config_path, overrides, "oracle"));
    if (*rates) {
      const invert::RateFit f = invert::rates_from_csv(csv_path, x_col, y_col);
      std::printf("slope %.6f  intercept %.6f  r2 %.6f\n", f.slope, f.intercept, f.r2);
      return 0;
    }
    if (*self) return selftest(selftest_out);
    if (*defaults) {
      std::fputs(invert::default_config_text().c_str(), stdout);
      return 0;
    }
  } catch (const invert::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfigError;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "invalid input: %s\n", e.what());
    return kConfigError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return kNumericalError;
  }
  return 0;
}
