#include "invert/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

namespace invert {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool valid_key(const std::string& k) {
  const auto dot = k.find('.');
  if (dot == std::string::npos || dot == 0 || dot + 1 == k.size()) return false;
  return std::all_of(k.begin(), k.end(), [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.'; });
}

double to_double(const std::string& key, const std::string& v) {
  std::string t = trim(v);
  if (t == "inf" || t == "infinity") return std::numeric_limits<double>::infinity();
  std::size_t pos = 0;
  double d = 0.0;
  try {
    d = std::stod(t, &pos);
  } catch (const std::exception&) {
    throw ConfigError(key, "expected a number, got '" + v + "'");
  }
  if (pos != t.size()) throw ConfigError(key, "expected a number, got '" + v + "'");
  return d;
}

std::uint64_t to_uint(const std::string& key, const std::string& v) {
  const std::string t = trim(v);
  std::uint64_t out = 0;
  auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
  if (ec != std::errc() || p != t.data() + t.size() || t.empty()) {
    // Accept integral values written in floating notation, e.g. 1e5.
    const double d = to_double(key, v);
    if (!(d >= 0.0) || d != std::floor(d) || d > 1.8e19) throw ConfigError(key, "expected a non-negative integer, got '" + v + "'");
    return static_cast<std::uint64_t>(d);
  }
  return out;
}

int to_int(const std::string& key, const std::string& v) {
  const std::string t = trim(v);
  int out = 0;
  auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
  if (ec != std::errc() || p != t.data() + t.size() || t.empty()) throw ConfigError(key, "expected an integer, got '" + v + "'");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  const std::string t = trim(v);
  if (t == "true" || t == "1" || t == "yes") return true;
  if (t == "false" || t == "0" || t == "no") return false;
  throw ConfigError(key, "expected true or false, got '" + v + "'");
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

ConfigMap ConfigMap::parse(const std::string& text, const std::string& source) {
  ConfigMap m;
  std::istringstream is(text);
  std::string line;
  int n = 0;
  while (std::getline(is, line)) {
    ++n;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("", source + ":" + std::to_string(n) + ": expected 'section.key = value'");
    const std::string key = trim(line.substr(0, eq));
    if (!valid_key(key)) throw ConfigError(key, source + ":" + std::to_string(n) + ": malformed key");
    m.values_[key] = trim(line.substr(eq + 1));
  }
  return m;
}

ConfigMap ConfigMap::from_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("", "cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << is.rdbuf();
  return parse(ss.str(), path);
}

void ConfigMap::set(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError(assignment, "override must look like section.key=value");
  const std::string key = trim(assignment.substr(0, eq));
  if (!valid_key(key)) throw ConfigError(key, "malformed key");
  values_[key] = trim(assignment.substr(eq + 1));
}

ExperimentConfig to_experiment_config(const ConfigMap& map) {
  ExperimentConfig c;
  using Setter = std::function<void(const std::string&, const std::string&)>;
  const std::map<std::string, Setter> setters = {
      {"field.dim", [&](auto& k, auto& v) { c.problem.dim = to_int(k, v); }},
      {"field.s", [&](auto& k, auto& v) { c.problem.s = to_double(k, v); }},
      {"field.kappa", [&](auto& k, auto& v) { c.problem.kappa = to_double(k, v); }},
      {"field.n_modes", [&](auto& k, auto& v) { c.problem.n_modes = to_uint(k, v); }},
      {"fem.dim", [&](auto& k, auto& v) { c.problem.dim = to_int(k, v); }},
      {"fem.min_level", [&](auto& k, auto& v) { c.min_level = to_int(k, v); }},
      {"fem.max_level", [&](auto& k, auto& v) { c.max_level = to_int(k, v); }},
      {"fem.cg_tol_factor", [&](auto& k, auto& v) { c.problem.cg_tol_factor = to_double(k, v); }},
      {"obs.k", [&](auto& k, auto& v) { c.problem.n_observations = to_uint(k, v); }},
      {"noise.sigma", [&](auto& k, auto& v) { c.sigma = to_double(k, v); }},
      {"data.seed", [&](auto& k, auto& v) { c.data_seed = to_uint(k, v); }},
      {"data.u_true",
       [&](auto& k, auto& v) {
         c.u_true.clear();
         for (const auto& s : split_list(v)) c.u_true.push_back(to_double(k, s));
       }},
      {"data.ref_level_offset", [&](auto& k, auto& v) { c.ref_level_offset = to_int(k, v); }},
      {"run.method", [&](auto&, auto& v) { c.method = trim(v); }},
      {"mcmc.M", [&](auto& k, auto& v) { c.M = to_uint(k, v); }},
      {"mcmc.J", [&](auto& k, auto& v) { c.J = to_uint(k, v); }},
      {"mcmc.q", [&](auto& k, auto& v) { c.q = to_double(k, v); }},
      {"mcmc.burn_in", [&](auto& k, auto& v) { c.burn_in = to_uint(k, v); }},
      {"mcmc.seed", [&](auto& k, auto& v) { c.mcmc_seed = to_uint(k, v); }},
      {"mcmc.replicas", [&](auto& k, auto& v) { c.replicas = to_uint(k, v); }},
      {"gpc.J", [&](auto& k, auto& v) { c.gpc_J = to_uint(k, v); }},
      {"gpc.l_build", [&](auto& k, auto& v) { c.gpc_l_build = to_int(k, v); }},
      {"gpc.quad_order", [&](auto& k, auto& v) { c.gpc_quad_order = to_uint(k, v); }},
      {"gpc.degree_cap", [&](auto& k, auto& v) { c.gpc_degree_cap = to_double(k, v); }},
      {"gpc.N",
       [&](auto& k, auto& v) {
         c.gpc_N.clear();
         for (const auto& s : split_list(v)) c.gpc_N.push_back(to_uint(k, s));
       }},
      {"gpc.error_scale", [&](auto& k, auto& v) { c.gpc_error_scale = to_double(k, v); }},
      {"gpc.M_min", [&](auto& k, auto& v) { c.gpc_M_min = to_uint(k, v); }},
      {"gpc.M_max", [&](auto& k, auto& v) { c.gpc_M_max = to_uint(k, v); }},
      {"gpc.bound_samples", [&](auto& k, auto& v) { c.gpc_bound_samples = to_uint(k, v); }},
      {"ml.min_L", [&](auto& k, auto& v) { c.ml_min_L = to_int(k, v); }},
      {"ml.L", [&](auto& k, auto& v) { c.ml_L = to_int(k, v); }},
      {"ml.q", [&](auto& k, auto& v) { c.ml_q = to_double(k, v); }},
      {"ml.master_seed", [&](auto& k, auto& v) { c.ml_master_seed = to_uint(k, v); }},
      {"ml.replicas", [&](auto& k, auto& v) { c.ml_replicas = to_uint(k, v); }},
      {"ml.sample_scale", [&](auto& k, auto& v) { c.ml_sample_scale = to_double(k, v); }},
      {"oracle.quad_order", [&](auto& k, auto& v) { c.oracle_order = to_uint(k, v); }},
      {"output.dir", [&](auto&, auto& v) { c.out_dir = trim(v); }},
      {"output.prefix", [&](auto&, auto& v) { c.prefix = trim(v); }},
      {"parallel.threads", [&](auto& k, auto& v) { c.threads = to_int(k, v); }},
      {"parallel.serial", [&](auto& k, auto& v) { c.serial = to_bool(k, v); }},
  };
  for (const auto& [k, v] : map.values()) {
    auto it = setters.find(k);
    if (it == setters.end()) throw ConfigError(k, "unknown key");
    it->second(k, v);
  }

  auto require = [](bool ok, const char* key, const char* msg) {
    if (!ok) throw ConfigError(key, msg);
  };
  require(c.problem.dim == 1 || c.problem.dim == 2, "field.dim", "must be 1 or 2");
  require(c.problem.s > 1.0, "field.s", "must exceed 1");
  require(c.problem.kappa > 0.0, "field.kappa", "must be positive");
  require(c.problem.n_modes >= 1, "field.n_modes", "must be at least 1");
  require(c.problem.cg_tol_factor > 0.0 && c.problem.cg_tol_factor < 1.0, "fem.cg_tol_factor", "must lie in (0, 1)");
  require(c.problem.n_observations >= 1, "obs.k", "must be at least 1");
  if (c.problem.dim == 2) {
    const auto m = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(c.problem.n_observations))));
    require(m * m == c.problem.n_observations, "obs.k", "must be a perfect square in 2D");
  }
  require(c.sigma > 0.0 && std::isfinite(c.sigma), "noise.sigma", "must be positive and finite");
  for (double u : c.u_true) require(u >= -1.0 && u <= 1.0, "data.u_true", "coordinates must lie in [-1, 1]");
  require(c.ref_level_offset >= 2, "data.ref_level_offset", "must be at least 2");
  require(c.method == "plain" || c.method == "gpc" || c.method == "mlmcmc" || c.method == "oracle", "run.method",
          "must be plain, gpc, mlmcmc or oracle");
  require(c.min_level >= 0 && c.min_level <= c.max_level, "fem.min_level", "must satisfy 0 <= min_level <= max_level");
  require(c.max_level <= (c.problem.dim == 1 ? 16 : 9), "fem.max_level", "too fine for this build");
  require(c.q > 0.0, "mcmc.q", "must be positive");
  require(c.J <= c.problem.n_modes, "mcmc.J", "exceeds field.n_modes");
  require(c.M >= 1, "mcmc.M", "must be at least 1");
  require(c.replicas >= 1, "mcmc.replicas", "must be at least 1");
  require(c.gpc_J >= 1 && c.gpc_J <= c.problem.n_modes, "gpc.J", "must lie in [1, field.n_modes]");
  require(c.gpc_quad_order >= 1, "gpc.quad_order", "must be at least 1");
  require(!c.gpc_N.empty(), "gpc.N", "needs at least one value");
  for (std::size_t n : c.gpc_N) require(n >= 1, "gpc.N", "values must be positive");
  require(c.gpc_M_min >= 1 && c.gpc_M_min <= c.gpc_M_max, "gpc.M_min", "must satisfy 1 <= M_min <= M_max");
  require(c.gpc_error_scale > 0.0, "gpc.error_scale", "must be positive");
  require(c.ml_min_L >= 0 && c.ml_min_L <= c.ml_L && c.ml_L <= 12, "ml.L", "must satisfy 0 <= min_L <= L <= 12");
  require(c.ml_q > 0.0, "ml.q", "must be positive");
  require(c.ml_replicas >= 1, "ml.replicas", "must be at least 1");
  require(c.ml_sample_scale > 0.0, "ml.sample_scale", "must be positive");
  require(c.oracle_order >= 2, "oracle.quad_order", "must be at least 2");
  require(c.threads >= 0, "parallel.threads", "must be non-negative");
  return c;
}

std::string default_config_text() {
  return R"(# problem
field.dim = 1
field.s = 2
field.kappa = 1
field.n_modes = 64
fem.min_level = 1
fem.max_level = 5
fem.cg_tol_factor = 1e-10
obs.k = 4
noise.sigma = 0.1
data.seed = 1
data.u_true = 0.5, -0.5, 0.25, -0.25
data.ref_level_offset = 2

# method: plain | gpc | mlmcmc | oracle
run.method = plain

# plain MCMC: M samples at fem.min_level, times 4 per level
mcmc.M = 1000
mcmc.J = 0
mcmc.q = 1
mcmc.burn_in = 0
mcmc.seed = 1
mcmc.replicas = 1

gpc.J = 4
gpc.l_build = -1
gpc.quad_order = 8
gpc.degree_cap = inf
gpc.N = 1, 2, 4, 8, 16, 32, 64
gpc.error_scale = 1
gpc.M_min = 1000
gpc.M_max = 100000
gpc.bound_samples = 1000

ml.min_L = 0
ml.L = 4
ml.q = 1
ml.master_seed = 1
ml.replicas = 1
ml.sample_scale = 1

oracle.quad_order = 16

output.dir = .
output.prefix = invert
parallel.threads = 0
parallel.serial = false
)";
}

}  // namespace invert
