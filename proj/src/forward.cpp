#include "invert/forward.hpp"

#include <cstring>
#include <sstream>

#include "invert/rng.hpp"

namespace invert {

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double unit(Point) { return 1.0; }

}  // namespace

FemForward::FemForward(std::shared_ptr<const FemLevel> level, std::shared_ptr<const CoefficientField> field,
                       std::size_t J, const ObservationSet& obs, const ScalarFunction& qoi_weight,
                       const ScalarFunction& load, double cg_tol)
    : level_(std::move(level)),
      field_(std::move(field)),
      table_(*level_, *field_, J),
      representers_(obs.representers(*level_)),
      qoi_representer_(level_->integrate_basis(qoi_weight)),
      load_(level_->integrate_basis(load)),
      cg_tol_(cg_tol) {}

ForwardSolution FemForward::solve(std::span<const double> u) const {
  std::vector<double> k(table_.n_points());
  table_.evaluate(u, k);
  for (double kq : k) {
    if (!(kq > 0.0)) throw std::domain_error("FemForward: non-positive coefficient at a quadrature point");
  }
  CsrMatrix a = level_->pattern();
  level_->assemble_stiffness(k, a.val);
  CgResult cg = pcg_sgs(a, load_, cg_tol_, 10 * level_->n_dof() + 100);

  ForwardSolution sol;
  sol.level = level_.get();
  sol.nodal = std::move(cg.x);
  sol.iterations = cg.iterations;
  sol.residual_norm = cg.residual_norm;
  const double assembly = static_cast<double>(table_.truncation() * table_.n_points()) + static_cast<double>(a.nnz());
  sol.work = {1, level_->n_dof(), cg.flops + assembly};
  return sol;
}

ForwardOutput FemForward::evaluate(std::span<const double> u) const {
  ForwardSolution sol = solve(u);
  ForwardOutput out;
  out.observations.reserve(representers_.size());
  for (const auto& r : representers_) out.observations.push_back(dot(r, sol.nodal));
  out.qoi = dot(qoi_representer_, sol.nodal);
  out.work = sol.work;
  out.work.flops += 2.0 * static_cast<double>((representers_.size() + 1) * level_->n_dof());
  return out;
}

std::string FemForward::describe() const {
  std::ostringstream os;
  os << "fem(J=" << table_.truncation() << ", l=" << level_->level() << ", d=" << level_->dim() << ")";
  return os.str();
}

std::size_t ForwardCache::KeyHash::operator()(const Key& k) const noexcept {
  std::uint64_t h = mix64(reinterpret_cast<std::uintptr_t>(k.model));
  for (double v : k.u) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    h = mix64(h ^ bits);
  }
  return static_cast<std::size_t>(h);
}

std::pair<ForwardOutput, bool> ForwardCache::get(const ForwardModel& model, std::span<const double> u) {
  const std::size_t J = std::min(model.truncation(), u.size());
  Key key{&model, std::vector<double>(u.begin(), u.begin() + static_cast<std::ptrdiff_t>(J))};
  {
    std::lock_guard lock(mutex_);
    if (auto it = map_.find(key); it != map_.end()) return {it->second, false};
  }
  ForwardOutput out = model.evaluate(u);
  std::lock_guard lock(mutex_);
  map_.emplace(std::move(key), out);
  return {std::move(out), true};
}

std::size_t ForwardCache::size() const {
  std::lock_guard lock(mutex_);
  return map_.size();
}

const ForwardOutput& EvalContext::at(const ForwardModel& model) {
  for (const auto& [m, out] : memo_) {
    if (m == &model) return out;
  }
  ForwardOutput out;
  if (cache_ != nullptr) {
    auto [cached, evaluated] = cache_->get(model, u_);
    out = std::move(cached);
    if (evaluated) work_ += out.work;
  } else {
    out = model.evaluate(u_);
    work_ += out.work;
  }
  memo_.emplace_back(&model, std::move(out));
  return memo_.back().second;
}

Observables scalar_observable(std::function<double(EvalContext&)> g) {
  return {1, [g = std::move(g)](EvalContext& ctx, std::span<double> out) { out[0] = g(ctx); }};
}

Observables qoi_of(const ForwardModel& model) {
  return {1, [&model](EvalContext& ctx, std::span<double> out) { out[0] = ctx.at(model).qoi; }};
}

ModelFamily::ModelFamily(const ProblemSetup& setup)
    : ModelFamily(std::make_shared<const CoefficientField>(builtin_field(setup.dim, setup.s, setup.kappa, setup.n_modes)),
                  ObservationSet::mollified_indicators(setup.dim, setup.n_observations), setup.cg_tol_factor) {}

ModelFamily::ModelFamily(std::shared_ptr<const CoefficientField> field, ObservationSet obs, double cg_tol_factor)
    : field_(std::move(field)), obs_(std::move(obs)), cg_tol_factor_(cg_tol_factor) {
  if (!(cg_tol_factor_ > 0.0)) throw std::invalid_argument("ModelFamily: cg tolerance factor must be positive");
}

std::shared_ptr<const FemLevel> ModelFamily::level(int l) const {
  std::lock_guard lock(mutex_);
  auto& slot = levels_[l];
  if (!slot) slot = std::make_shared<const FemLevel>(field_->dim(), l);
  return slot;
}

const FemForward& ModelFamily::forward(std::size_t J, int l) const {
  auto lvl = level(l);
  std::lock_guard lock(mutex_);
  auto& slot = models_[{J, l}];
  if (!slot) {
    slot = std::make_unique<FemForward>(lvl, field_, J, obs_, unit, unit, default_cg_tolerance(l, cg_tol_factor_));
  }
  return *slot;
}

}  // namespace invert
