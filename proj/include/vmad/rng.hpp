#pragma once

#include <cstdint>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/special_functions/beta.hpp>

namespace vmad {

// splitmix64 (Steele, Lea, Flood 2014). Used both as a plain stream and,
// via mix_key, as a counter-based generator keyed on (seed, index) so a
// draw never depends on how many draws happened before it.
struct SplitMix64 {
  uint64_t state = 0;

  explicit SplitMix64(uint64_t seed) : state(seed) {}

  uint64_t next() {
    uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }
};

inline uint64_t mix_key(uint64_t seed, uint64_t index) {
  SplitMix64 g(seed ^ (0x9E3779B97F4A7C15ULL * (index + 1)));
  return g.next();
}

// Deterministic double stream: every variate is a pure transform of the
// next uniform, so output depends only on the seed and draw count, not
// on the platform's distribution implementations.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  // uniform in [0, 1) with 53 random bits
  double uniform01() { return static_cast<double>(gen_.next() >> 11) * 0x1p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // uniform integer in [0, n)
  uint64_t below(uint64_t n) {
    uint64_t r = static_cast<uint64_t>(uniform01() * static_cast<double>(n));
    return r >= n ? n - 1 : r;
  }

  uint64_t integer(uint64_t lo, uint64_t hi) {  // inclusive range
    return lo + below(hi - lo + 1);
  }

  double normal(double mean = 0.0, double sd = 1.0) {
    double u = uniform01();
    if (u <= 0.0) u = 0x1p-53;
    static const boost::math::normal_distribution<double> unit;
    return mean + sd * boost::math::quantile(unit, u);
  }

  double beta(double a, double b) {
    double u = uniform01();
    if (u <= 0.0) u = 0x1p-53;
    return boost::math::ibeta_inv(a, b, u);
  }

 private:
  SplitMix64 gen_;
};

}  // namespace vmad
