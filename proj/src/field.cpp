#include "invert/field.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <string>
#include <tuple>

namespace invert {

namespace {

constexpr double kPi = std::numbers::pi;

}  // namespace

ParamVector::ParamVector(std::vector<double> coords) : coords_(std::move(coords)) {
  for (std::size_t j = 0; j < coords_.size(); ++j) {
    if (!(coords_[j] >= -1.0 && coords_[j] <= 1.0)) {
      throw std::invalid_argument("ParamVector: coordinate " + std::to_string(j + 1) +
                                  " outside [-1, 1]");
    }
  }
}

CoefficientField::CoefficientField(int dim, ScalarFunction kbar, double kbar_min, double kbar_max,
                                   std::vector<CoefficientMode> modes, double kappa, double decay_s)
    : dim_(dim),
      kbar_(std::move(kbar)),
      kbar_min_(kbar_min),
      kbar_max_(kbar_max),
      modes_(std::move(modes)),
      kappa_(kappa),
      decay_s_(decay_s) {
  if (dim_ != 1 && dim_ != 2) throw std::invalid_argument("CoefficientField: dim must be 1 or 2");
  if (!(kbar_min_ > 0.0) || kbar_max_ < kbar_min_) {
    throw std::invalid_argument("CoefficientField: need 0 < essinf Kbar <= esssup Kbar");
  }
  if (!(kappa_ > 0.0)) throw std::invalid_argument("CoefficientField: kappa must be positive");
  if (!(decay_s_ > 1.0)) throw std::invalid_argument("CoefficientField: decay exponent s must exceed 1");

  sup_norms_.reserve(modes_.size());
  for (std::size_t j = 0; j < modes_.size(); ++j) {
    if (modes_[j].sup_norm < 0.0) throw std::invalid_argument("CoefficientField: negative sup-norm");
    if (j > 0 && modes_[j].sup_norm > modes_[j - 1].sup_norm) {
      throw std::invalid_argument("CoefficientField: mode sup-norms must be non-increasing");
    }
    sup_norms_.push_back(modes_[j].sup_norm);
  }
  const double budget = kappa_ / (1.0 + kappa_) * kbar_min_;
  if (sup_norm_sum() > budget * (1.0 + 1e-12)) {
    throw std::invalid_argument("CoefficientField: sum of mode sup-norms exceeds kappa/(1+kappa)*Kbar_min");
  }
}

double CoefficientField::sup_norm_sum() const noexcept {
  return std::accumulate(sup_norms_.begin(), sup_norms_.end(), 0.0);
}

double CoefficientField::eval(std::span<const double> u, Point x) const {
  if (u.size() > modes_.size()) {
    throw std::invalid_argument("CoefficientField::eval: truncation exceeds stored modes");
  }
  double k = kbar_(x);
  for (std::size_t j = 0; j < u.size(); ++j) {
    if (u[j] != 0.0) k += u[j] * modes_[j].fn(x);
  }
  return k;
}

double CoefficientField::truncation_tail(std::size_t J) const noexcept {
  double tail = 0.0;
  // Sum smallest-first for accuracy.
  for (std::size_t j = sup_norms_.size(); j > J; --j) tail += sup_norms_[j - 1];
  return tail;
}

CoefficientField builtin_field(int dim, double s, double kappa, std::size_t n_modes) {
  if (!(s > 1.0)) throw std::invalid_argument("builtin_field: decay exponent s must exceed 1");
  if (!(kappa > 0.0)) throw std::invalid_argument("builtin_field: kappa must be positive");
  if (n_modes == 0) throw std::invalid_argument("builtin_field: n_modes must be at least 1");
  if (dim != 1 && dim != 2) throw std::invalid_argument("builtin_field: dim must be 1 or 2");

  const double budget = kappa / (1.0 + kappa);
  std::vector<CoefficientMode> modes;
  modes.reserve(n_modes);

  if (dim == 1) {
    double total = 0.0;
    for (std::size_t j = n_modes; j >= 1; --j) total += std::pow(static_cast<double>(j), -s);
    const double c = budget / total;
    for (std::size_t j = 1; j <= n_modes; ++j) {
      const double jj = static_cast<double>(j);
      const double amp = c * std::pow(jj, -s);
      modes.push_back({[amp, jj](Point p) { return amp * std::sin(jj * kPi * p.x); }, amp, amp * jj * kPi});
    }
  } else {
    // Enumerate (i, k) by product, smallest products first; ties lexicographic.
    std::vector<std::tuple<std::size_t, std::size_t, std::size_t>> pairs;  // (i*k, i, k)
    std::size_t bound = 1;
    for (;;) {
      pairs.clear();
      for (std::size_t i = 1; i <= bound; ++i) {
        for (std::size_t k = 1; i * k <= bound; ++k) pairs.emplace_back(i * k, i, k);
      }
      if (pairs.size() >= n_modes) break;
      bound *= 2;
    }
    std::sort(pairs.begin(), pairs.end());
    // Every pair with product below the last kept product is already present,
    // so truncating the sorted list gives the true leading modes.
    pairs.resize(n_modes);
    double total = 0.0;
    for (auto it = pairs.rbegin(); it != pairs.rend(); ++it) {
      total += std::pow(static_cast<double>(std::get<0>(*it)), -s);
    }
    const double c = budget / total;
    for (const auto& [prod, i, k] : pairs) {
      const double amp = c * std::pow(static_cast<double>(prod), -s);
      const double fi = static_cast<double>(i);
      const double fk = static_cast<double>(k);
      modes.push_back({[amp, fi, fk](Point p) { return amp * std::sin(fi * kPi * p.x) * std::sin(fk * kPi * p.y); },
                       amp, amp * kPi * std::max(fi, fk)});
    }
  }

  return CoefficientField(dim, [](Point) { return 1.0; }, 1.0, 1.0, std::move(modes), kappa, s);
}

}  // namespace invert
