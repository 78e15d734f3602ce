#pragma once

#include <cstdint>
#include <initializer_list>

namespace invert {

/// Counter-based random stream. Every draw is a pure function of
/// (seed, stream, step, slot), so chains can be replayed, split across
/// threads, or interleaved without sharing generator state.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream) noexcept;

  /// Uniform on [0, 1) with 53 random bits.
  double uniform(std::uint64_t step, std::uint64_t slot) const noexcept;

  /// Uniform on [-1, 1).
  double symmetric(std::uint64_t step, std::uint64_t slot) const noexcept {
    return 2.0 * uniform(step, slot) - 1.0;
  }

  /// Standard normal via Box-Muller; consumes slots 2*slot and 2*slot+1.
  double normal(std::uint64_t step, std::uint64_t slot) const noexcept;

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream() const noexcept { return stream_; }

 private:
  std::uint64_t bits(std::uint64_t step, std::uint64_t slot) const noexcept;

  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t key_;
};

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// Deterministically derives a child seed from a parent seed and a list of tags.
std::uint64_t derive_seed(std::uint64_t parent, std::initializer_list<std::uint64_t> tags) noexcept;

}  // namespace invert
