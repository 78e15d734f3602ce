#include "invert/gpc.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "invert/quadrature.hpp"
#include "invert/rng.hpp"

namespace invert {

MultiIndex::MultiIndex(std::vector<std::pair<std::uint32_t, std::uint32_t>> terms) : terms_(std::move(terms)) {
  std::sort(terms_.begin(), terms_.end());
  for (std::size_t i = 0; i < terms_.size(); ++i) {
    if (terms_[i].second == 0) throw std::invalid_argument("MultiIndex: stored degrees must be positive");
    if (i > 0 && terms_[i].first == terms_[i - 1].first) throw std::invalid_argument("MultiIndex: repeated coordinate");
  }
}

MultiIndex MultiIndex::from_dense(std::span<const std::uint32_t> degrees) {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> t;
  for (std::size_t j = 0; j < degrees.size(); ++j) {
    if (degrees[j] > 0) t.emplace_back(static_cast<std::uint32_t>(j), degrees[j]);
  }
  return MultiIndex(std::move(t));
}

std::uint32_t MultiIndex::order() const noexcept {
  std::uint32_t s = 0;
  for (const auto& t : terms_) s += t.second;
  return s;
}

std::uint32_t MultiIndex::degree(std::uint32_t coord) const noexcept {
  for (const auto& t : terms_) {
    if (t.first == coord) return t.second;
  }
  return 0;
}

std::string MultiIndex::to_string() const {
  std::ostringstream os;
  os << '{';
  for (std::size_t i = 0; i < terms_.size(); ++i) os << (i ? "," : "") << terms_[i].first << ':' << terms_[i].second;
  os << '}';
  return os.str();
}

void legendre_all(unsigned n, double t, std::span<double> out) {
  if (!(std::abs(t) <= 1.0)) throw std::domain_error("legendre: argument outside [-1,1]");
  double p0 = 1.0;
  double p1 = t;
  out[0] = 1.0;
  if (n >= 1) out[1] = std::sqrt(3.0) * t;
  for (unsigned k = 2; k <= n; ++k) {
    const double kk = k;
    const double p2 = ((2.0 * kk - 1.0) * t * p1 - (kk - 1.0) * p0) / kk;
    p0 = p1;
    p1 = p2;
    out[k] = std::sqrt(2.0 * kk + 1.0) * p2;
  }
}

double legendre_eval(unsigned n, double t) {
  std::vector<double> v(n + 1);
  legendre_all(n, t, v);
  return v[n];
}

double tensor_legendre(const MultiIndex& nu, std::span<const double> u) {
  double p = 1.0;
  for (const auto& [j, d] : nu.terms()) {
    if (j >= u.size()) throw std::invalid_argument("tensor_legendre: index support exceeds parameter dimension");
    p *= legendre_eval(d, u[j]);
  }
  return p;
}

double candidate_weight(std::size_t j) noexcept { return 1.0 + std::log2(static_cast<double>(j) + 2.0); }

std::vector<MultiIndex> candidate_set(std::size_t J, unsigned max_degree, double cap) {
  const double total = std::pow(static_cast<double>(max_degree) + 1.0, static_cast<double>(J));
  if (total > static_cast<double>(kMaxGridNodes)) throw GridTooLarge(J, max_degree + 1, total);
  std::vector<MultiIndex> out;
  std::vector<std::uint32_t> d(J, 0);
  for (std::size_t m = 0; m < static_cast<std::size_t>(total); ++m) {
    std::size_t r = m;
    double budget = 0.0;
    for (std::size_t j = 0; j < J; ++j) {
      d[j] = static_cast<std::uint32_t>(r % (max_degree + 1));
      r /= max_degree + 1;
      budget += d[j] * candidate_weight(j);
    }
    if (budget <= cap * (1.0 + 1e-12)) out.push_back(MultiIndex::from_dense(d));
  }
  return out;
}

double GpcSurrogate::row_norm(std::size_t i) const {
  double s = 0.0;
  for (double c : row(i)) s += c * c;
  return std::sqrt(s);
}

double GpcSurrogate::eval(std::span<const double> u, std::span<double> obs) const {
  if (u.size() < J_) throw std::invalid_argument("GpcSurrogate: parameter dimension below J");
  const std::size_t stride = max_degree_ + 1;
  std::vector<double> table(J_ * stride);
  for (std::size_t j = 0; j < J_; ++j) legendre_all(max_degree_, u[j], std::span<double>(table).subspan(j * stride, stride));
  std::fill(obs.begin(), obs.end(), 0.0);
  double q = 0.0;
  for (std::size_t i = 0; i < indices_.size(); ++i) {
    double p = 1.0;
    for (const auto& [j, d] : indices_[i].terms()) p *= table[j * stride + d];
    const double* c = coeffs_.data() + i * (k_ + 1);
    for (std::size_t r = 0; r < k_; ++r) obs[r] += c[r] * p;
    q += c[k_] * p;
  }
  return q;
}

ForwardOutput GpcSurrogate::evaluate(std::span<const double> u) const {
  ForwardOutput out;
  out.observations.resize(k_);
  out.qoi = eval(u, out.observations);
  double flops = 5.0 * static_cast<double>(J_ * max_degree_);
  for (const auto& nu : indices_) flops += static_cast<double>(nu.terms().size() + 2 * (k_ + 1));
  out.work = {0, 0, flops};
  return out;
}

GpcSurrogate GpcSurrogate::truncated(std::size_t N) const {
  if (N == 0) throw std::invalid_argument("GpcSurrogate: N must be positive");
  GpcSurrogate t = *this;
  if (N >= size()) return t;
  for (std::size_t i = N; i < size(); ++i) t.discarded_norms_.push_back(row_norm(i));
  t.indices_.resize(N);
  t.coeffs_.resize(N * (k_ + 1));
  t.kept_energy_ = 0.0;
  for (std::size_t i = 0; i < N; ++i) t.kept_energy_ += t.row_norm(i) * t.row_norm(i);
  t.tail_energy_ = candidate_energy_ - t.kept_energy_;
  return t;
}

bool GpcSurrogate::operator==(const GpcSurrogate& o) const {
  auto same_bits = [](double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; };
  if (k_ != o.k_ || J_ != o.J_ || l_build_ != o.l_build_ || candidates_ != o.candidates_ ||
      max_degree_ != o.max_degree_ || indices_ != o.indices_ || coeffs_.size() != o.coeffs_.size()) {
    return false;
  }
  for (std::size_t i = 0; i < coeffs_.size(); ++i) {
    if (!same_bits(coeffs_[i], o.coeffs_[i])) return false;
  }
  return same_bits(total_energy_, o.total_energy_) && same_bits(candidate_energy_, o.candidate_energy_) &&
         same_bits(kept_energy_, o.kept_energy_) && same_bits(tail_energy_, o.tail_energy_);
}

namespace {

constexpr char kMagic[8] = {'I', 'N', 'V', 'G', 'P', 'C', '0', '1'};

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!is) throw std::runtime_error("GpcSurrogate: truncated file");
  return v;
}

}  // namespace

void GpcSurrogate::save(std::ostream& os) const {
  os.write(kMagic, sizeof kMagic);
  put<std::uint64_t>(os, k_);
  put<std::uint64_t>(os, indices_.size());
  put<std::uint64_t>(os, J_);
  put<std::int64_t>(os, l_build_);
  put<std::uint64_t>(os, candidates_);
  put<std::uint64_t>(os, max_degree_);
  put<double>(os, total_energy_);
  put<double>(os, candidate_energy_);
  put<double>(os, kept_energy_);
  put<double>(os, tail_energy_);
  for (std::size_t i = 0; i < indices_.size(); ++i) {
    put<std::uint64_t>(os, indices_[i].terms().size());
    for (const auto& [j, d] : indices_[i].terms()) {
      put<std::uint32_t>(os, j);
      put<std::uint32_t>(os, d);
    }
    for (double c : row(i)) put<double>(os, c);
  }
  if (!os) throw std::runtime_error("GpcSurrogate: write failed");
}

GpcSurrogate GpcSurrogate::load(std::istream& is) {
  char magic[8];
  is.read(magic, sizeof magic);
  if (!is || std::memcmp(magic, kMagic, sizeof magic) != 0) throw std::runtime_error("GpcSurrogate: bad header");
  GpcSurrogate s;
  s.k_ = get<std::uint64_t>(is);
  const auto n = get<std::uint64_t>(is);
  s.J_ = get<std::uint64_t>(is);
  s.l_build_ = static_cast<int>(get<std::int64_t>(is));
  s.candidates_ = get<std::uint64_t>(is);
  s.max_degree_ = static_cast<unsigned>(get<std::uint64_t>(is));
  s.total_energy_ = get<double>(is);
  s.candidate_energy_ = get<double>(is);
  s.kept_energy_ = get<double>(is);
  s.tail_energy_ = get<double>(is);
  for (std::uint64_t i = 0; i < n; ++i) {
    const auto nnz = get<std::uint64_t>(is);
    std::vector<std::pair<std::uint32_t, std::uint32_t>> t;
    for (std::uint64_t p = 0; p < nnz; ++p) {
      const auto j = get<std::uint32_t>(is);
      const auto d = get<std::uint32_t>(is);
      t.emplace_back(j, d);
    }
    s.indices_.emplace_back(std::move(t));
    for (std::size_t r = 0; r <= s.k_; ++r) s.coeffs_.push_back(get<double>(is));
  }
  return s;
}

void GpcSurrogate::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("GpcSurrogate: cannot open " + path);
  save(os);
}

GpcSurrogate GpcSurrogate::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("GpcSurrogate: cannot open " + path);
  return load(is);
}

GpcSurrogate build_surrogate(const ForwardModel& model, int l_build, const GpcOptions& opts, Execution exec,
                             ForwardCache* cache) {
  const std::size_t J = model.truncation();
  const std::size_t n = opts.quad_order;
  if (J == 0) throw std::invalid_argument("build_surrogate: model has no parameters");
  if (J > kMaxQuadratureDims) {
    throw GridTooLarge(J, n, std::pow(static_cast<double>(n), static_cast<double>(J)));
  }
  const QuadratureGrid grid(J, n);
  const std::size_t k = model.n_observations();
  const std::size_t w = k + 1;
  const std::size_t nodes = grid.size();

  std::vector<double> values(nodes * w);
  std::vector<Work> work(nodes);
  for_each_index(nodes, exec, [&](std::size_t m) {
    const std::vector<double> u = grid.node(m);
    EvalContext ctx(u, cache);
    const ForwardOutput& out = ctx.at(model);
    std::copy(out.observations.begin(), out.observations.end(), values.begin() + static_cast<std::ptrdiff_t>(m * w));
    values[m * w + k] = out.qoi;
    work[m] = ctx.work();
  });

  GpcSurrogate s;
  s.k_ = k;
  s.J_ = J;
  s.l_build_ = l_build;
  s.max_degree_ = static_cast<unsigned>(n - 1);
  for (std::size_t m = 0; m < nodes; ++m) {
    s.build_work_ += work[m];
    for (std::size_t r = 0; r < w; ++r) s.total_energy_ += grid.weight(m) * values[m * w + r] * values[m * w + r];
  }

  // Separable transform: replace the node index of each coordinate in turn
  // by a polynomial degree, T[d][i] = w_i L_d(x_i).
  const auto& rule = grid.rule();
  std::vector<double> T(n * n);
  {
    std::vector<double> L(n);
    for (std::size_t i = 0; i < n; ++i) {
      legendre_all(static_cast<unsigned>(n - 1), rule.nodes[i], L);
      for (std::size_t d = 0; d < n; ++d) T[d * n + i] = rule.weights[i] * L[d];
    }
  }
  std::vector<double> next(values.size());
  std::size_t stride = 1;
  for (std::size_t j = 0; j < J; ++j) {
    for (std::size_t m = 0; m < nodes; ++m) {
      const std::size_t i_m = (m / stride) % n;
      const std::size_t base = m - i_m * stride;
      for (std::size_t r = 0; r < w; ++r) {
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) acc += T[i_m * n + i] * values[(base + i * stride) * w + r];
        next[m * w + r] = acc;
      }
    }
    std::swap(values, next);
    stride *= n;
  }

  const std::vector<MultiIndex> cands = candidate_set(J, static_cast<unsigned>(n - 1), opts.degree_cap);
  s.candidates_ = cands.size();
  struct Row {
    std::size_t cand;
    std::size_t pos;
    double norm2;
  };
  std::vector<Row> rows;
  rows.reserve(cands.size());
  for (std::size_t c = 0; c < cands.size(); ++c) {
    std::size_t pos = 0;
    std::size_t st = 1;
    for (std::size_t j = 0; j < J; ++j) {
      pos += cands[c].degree(static_cast<std::uint32_t>(j)) * st;
      st *= n;
    }
    double e = 0.0;
    for (std::size_t r = 0; r < w; ++r) e += values[pos * w + r] * values[pos * w + r];
    rows.push_back({c, pos, e});
    s.candidate_energy_ += e;
  }
  // Zero index first, then by decreasing norm; ties by candidate order.
  std::stable_sort(rows.begin(), rows.end(), [&](const Row& a, const Row& b) {
    const bool za = cands[a.cand].is_zero();
    const bool zb = cands[b.cand].is_zero();
    if (za != zb) return za;
    return a.norm2 > b.norm2;
  });
  const std::size_t keep = opts.N == 0 ? rows.size() : std::min(opts.N, rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (i < keep) {
      s.indices_.push_back(cands[rows[i].cand]);
      for (std::size_t r = 0; r < w; ++r) s.coeffs_.push_back(values[rows[i].pos * w + r]);
      s.kept_energy_ += rows[i].norm2;
    } else {
      s.discarded_norms_.push_back(std::sqrt(rows[i].norm2));
    }
  }
  s.tail_energy_ = s.candidate_energy_ - s.kept_energy_;
  return s;
}

std::string SurrogateForward::describe() const {
  std::ostringstream os;
  os << "gpc(N=" << s_->size() << ", J=" << s_->J() << ", l_build=" << s_->l_build() << ")";
  return os.str();
}

double QoiCutoff::operator()(double q) const noexcept {
  evaluations_.fetch_add(1, std::memory_order_relaxed);
  if (q > bound_ || q < -bound_) {
    clamps_.fetch_add(1, std::memory_order_relaxed);
    return std::clamp(q, -bound_, bound_);
  }
  return q;
}

double estimate_qoi_bound(const ForwardModel& model, std::size_t n, std::uint64_t seed, Execution exec) {
  const std::size_t J = model.truncation();
  std::vector<double> q(n);
  CounterRng rng(seed, 0);
  for_each_index(n, exec, [&](std::size_t i) {
    std::vector<double> u(J);
    for (std::size_t j = 0; j < J; ++j) u[j] = rng.symmetric(i, j);
    q[i] = std::abs(model.evaluate(u).qoi);
  });
  double m = 0.0;
  for (double v : q) m = std::max(m, v);
  return m + 1.0;
}

Observables qoi_cutoff(const SurrogateForward& model, const QoiCutoff& cutoff) {
  return {1, [&model, &cutoff](EvalContext& ctx, std::span<double> out) { out[0] = cutoff(ctx.at(model).qoi); }};
}

double surrogate_l2_error(const GpcSurrogate& s, const ForwardModel& ref, std::size_t quad_order, Execution exec,
                          ForwardCache* cache) {
  if (ref.truncation() > kMaxQuadratureDims || s.J() > kMaxQuadratureDims) {
    throw GridTooLarge(std::max(ref.truncation(), s.J()), quad_order, 0.0);
  }
  const QuadratureGrid grid(std::max(ref.truncation(), s.J()), quad_order);
  std::vector<double> err(grid.size());
  for_each_index(grid.size(), exec, [&](std::size_t m) {
    const std::vector<double> u = grid.node(m);
    EvalContext ctx(u, cache);
    const ForwardOutput& g = ctx.at(ref);
    std::vector<double> obs(s.k());
    s.eval(u, obs);
    double e = 0.0;
    for (std::size_t r = 0; r < obs.size(); ++r) e += (g.observations[r] - obs[r]) * (g.observations[r] - obs[r]);
    err[m] = e;
  });
  double total = 0.0;
  for (std::size_t m = 0; m < grid.size(); ++m) total += grid.weight(m) * err[m];
  return std::sqrt(total);
}

}  // namespace invert
