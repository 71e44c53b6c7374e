//===- rng.h - Seedable, splittable random streams -------------*- C++ -*-===//
//
// The engine is std::mt19937_64, whose output sequence is fixed by the
// standard. The distributions below are written out here because the
// standard library distributions are implementation-defined, and generated
// datasets must be identical across toolchains.
//
//===----------------------------------------------------------------------===//

#ifndef POLARCORE_RNG_H
#define POLARCORE_RNG_H

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <utility>
#include <vector>

namespace polarcore {

inline std::uint64_t splitMix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

class Rng {
public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(splitMix64(seed)) {}

  /// Independent child stream; depends only on (seed, streamId), never on
  /// how much of the parent stream was consumed.
  Rng split(std::uint64_t streamId) const {
    return Rng(splitMix64(seed_ ^ splitMix64(streamId + 0x632be59bd9b4e019ULL)));
  }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t next() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, bound), rejection sampled.
  std::uint64_t below(std::uint64_t bound) {
    std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t x;
    do
      x = next();
    while (x >= limit);
    return x % bound;
  }

  bool bernoulli(double p) { return uniform() < p; }

  /// Number of trials up to and including the first success (support 1, 2,
  /// ...), mean 1/p.
  int geometric(double p) {
    int k = 1;
    while (!bernoulli(p))
      ++k;
    return k;
  }

  double gaussian(double mean, double stddev) {
    if (hasSpare_) {
      hasSpare_ = false;
      return mean + stddev * spare_;
    }
    double u1;
    do
      u1 = uniform();
    while (u1 <= 0.0);
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    hasSpare_ = true;
    return mean + stddev * r * std::cos(theta);
  }

  template <typename T> void shuffle(std::vector<T> &items) {
    for (std::size_t i = items.size(); i > 1; --i)
      std::swap(items[i - 1], items[below(i)]);
  }

private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool hasSpare_ = false;
};

} // namespace polarcore

#endif // POLARCORE_RNG_H
