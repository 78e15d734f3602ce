#include "invert/rng.hpp"

#include <cmath>
#include <numbers>

namespace invert {

std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t parent, std::initializer_list<std::uint64_t> tags) noexcept {
  std::uint64_t h = mix64(parent ^ 0x5851f42d4c957f2dULL);
  for (auto t : tags) h = mix64(h ^ mix64(t + 0x2545f4914f6cdd1dULL));
  return h;
}

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t stream) noexcept
    : seed_(seed), stream_(stream), key_(mix64(mix64(seed) ^ (stream * 0xd1342543de82ef95ULL + 1))) {}

std::uint64_t CounterRng::bits(std::uint64_t step, std::uint64_t slot) const noexcept {
  // Two rounds keep neighbouring counters decorrelated.
  std::uint64_t h = mix64(key_ ^ (step * 0xa0761d6478bd642fULL));
  h = mix64(h ^ (slot * 0xe7037ed1a0b428dbULL + 0x8ebc6af09c88c6e3ULL));
  return mix64(h);
}

double CounterRng::uniform(std::uint64_t step, std::uint64_t slot) const noexcept {
  return static_cast<double>(bits(step, slot) >> 11) * 0x1.0p-53;
}

double CounterRng::normal(std::uint64_t step, std::uint64_t slot) const noexcept {
  // 1 - U keeps the log argument in (0, 1].
  const double u1 = 1.0 - uniform(step, 2 * slot);
  const double u2 = uniform(step, 2 * slot + 1);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace invert
