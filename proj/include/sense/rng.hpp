#pragma once

#include <cstdint>
#include <string_view>

namespace sense {

/// SplitMix64 generator. Every random quantity in the project is drawn from
/// this stream so corpora and models are bit-comparable across builds.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

  std::uint64_t next() noexcept;

  /// Uniform in [0, 1) with 53 bits of resolution.
  double uniform() noexcept;

  /// Uniform in [lo, hi).
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  /// Integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n) noexcept;

  /// Standard normal via Box-Muller; consumes two uniforms per call.
  double normal() noexcept;

  std::uint64_t state() const noexcept { return state_; }

 private:
  std::uint64_t state_;
};

/// Finalizer step of SplitMix64, usable as a 64-bit hash mixer.
std::uint64_t mix64(std::uint64_t z) noexcept;

/// Seed for a named sub-stream: hashes (seed, tag) through the generator.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag) noexcept;

}  // namespace sense
