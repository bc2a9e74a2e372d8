#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

#include <boost/math/distributions/normal.hpp>

namespace atomsense {

/// Counter-based generator: every draw is a pure function of
/// (seed, stream, counter), so per-atom or per-shot randomness does not
/// depend on evaluation order or thread count. The mixer is the SplitMix64
/// finalizer applied to a Weyl-spaced key.
class CounterRng {
 public:
  constexpr CounterRng(std::uint64_t seed = 0, std::uint64_t stream = 0)
      : key_(mix(seed ^ mix(stream + 0x632be59bd9b4e019ULL))) {}

  static constexpr std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  constexpr std::uint64_t bits(std::uint64_t counter) const {
    return mix(key_ + mix(counter));
  }

  // Uniform on the open interval (0, 1).
  double uniform(std::uint64_t counter) const {
    return (static_cast<double>(bits(counter) >> 11) + 0.5) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller; consumes counters 2c and 2c+1.
  double normal(std::uint64_t counter) const {
    const double u1 = uniform(2 * counter);
    const double u2 = uniform(2 * counter + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  CounterRng substream(std::uint64_t id) const { return CounterRng(key_, id); }

 private:
  std::uint64_t key_;
};

/// Sequential view over a CounterRng for code paths that consume draws in a
/// fixed order.
class RngStream {
 public:
  explicit RngStream(CounterRng rng) : rng_(rng) {}
  RngStream(std::uint64_t seed, std::uint64_t stream) : rng_(seed, stream) {}

  double uniform() { return rng_.uniform(next_++); }
  double normal() { return rng_.normal(next_++); }
  std::uint64_t position() const { return next_; }

 private:
  CounterRng rng_;
  std::uint64_t next_ = 0;
};

// Inverse of the standard normal CDF.
inline double normal_quantile(double p) {
  static const boost::math::normal_distribution<double> unit;
  return boost::math::quantile(unit, p);
}

}  // namespace atomsense
