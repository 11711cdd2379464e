#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>
#include <limits>

namespace epmix {

/// splitmix64 finalizer; used to derive independent stream keys.
constexpr std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// xoshiro256** generator with helpers for the variates used throughout the
/// library. Satisfies UniformRandomBitGenerator.
///
/// Streams are derived from a base seed plus a list of logical indices
/// (chain number, theta index, ...), so results never depend on which thread
/// happens to run which chain.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed = 0x5eed);
  Rng(std::uint64_t seed, std::initializer_list<std::uint64_t> stream);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()();

  /// Uniform on the open interval (0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  /// Gamma(shape, rate = 1) via Marsaglia–Tsang; shapes below one use the
  /// U^{1/shape} boost.
  double gamma(double shape);
  /// +1 or -1 with equal probability.
  double sign();

 private:
  std::array<std::uint64_t, 4> s_{};
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace epmix
