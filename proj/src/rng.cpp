#include "sense/rng.hpp"

#include <cmath>
#include <numbers>

namespace sense {

std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t SplitMix64::next() noexcept {
  state_ += 0x9E3779B97F4A7C15ULL;
  return mix64(state_);
}

double SplitMix64::uniform() noexcept {
  return static_cast<double>(next() >> 11) * 0x1.0p-53;
}

std::uint64_t SplitMix64::below(std::uint64_t n) noexcept {
  return static_cast<std::uint64_t>(uniform() * static_cast<double>(n)) % n;
}

double SplitMix64::normal() noexcept {
  // 1 - u keeps the log argument in (0, 1].
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag) noexcept {
  SplitMix64 g(seed);
  std::uint64_t h = g.next();
  for (unsigned char c : tag) {
    g = SplitMix64(h ^ c);
    h = g.next();
  }
  return h;
}

}  // namespace sense
