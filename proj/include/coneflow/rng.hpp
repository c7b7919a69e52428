#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "coneflow/common.hpp"

namespace coneflow {

// mt19937_64 with explicit output mappings. std::*_distribution is not pinned
// across standard libraries, and byte-identical reruns are a hard requirement,
// so the mappings are spelled out here.
class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(seed) {}

  // uniform in [0,1) with 53-bit resolution
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // standard normal via Box-Muller, caching the second draw
  double gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * kPi * u2);
    has_spare_ = true;
    return r * std::cos(2.0 * kPi * u2);
  }

  uint64_t next_u64() { return eng_(); }

  // unbiased integer in [0, n)
  uint64_t below(uint64_t n) {
    const uint64_t lim = ~uint64_t{0} - ~uint64_t{0} % n;
    uint64_t x = 0;
    do {
      x = eng_();
    } while (x >= lim);
    return x % n;
  }

  int sign() { return (eng_() & 1u) ? 1 : -1; }

 private:
  std::mt19937_64 eng_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// derive independent stream seeds from a base seed (splitmix64 finalizer)
inline uint64_t mix_seed(uint64_t base, uint64_t stream) {
  uint64_t x = base + 0x9e3779b97f4a7c15ull * (stream + 1);
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ull;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebull;
  x ^= x >> 31;
  return x;
}

}  // namespace coneflow
