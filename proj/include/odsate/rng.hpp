#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

namespace odsate {

// Draw stages: each (seed, replication, stage) triple owns an independent
// stream, so pool creation, misclassification, subsampling, and Monte Carlo
// integration never share state and results are reproducible under any
// worker scheduling.
enum class Stage : std::uint64_t {
  pool = 1,
  sample = 2,
  calibration = 3,
  truth = 4,
  fixture = 5,
};

// Splittable deterministic generator: a splitmix64-keyed xoshiro256++ stream.
// All draws are produced from explicit integer arithmetic (no std::
// distributions), so sequences are identical across platforms and builds.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t replication, Stage stage) {
    std::uint64_t k = mix(seed + 0x9E3779B97F4A7C15ULL);
    k = mix(k ^ (0xA24BAED4963EE407ULL * (replication + 1)));
    k = mix(k ^ (0x9FB21C651E98DF25ULL * static_cast<std::uint64_t>(stage)));
    for (int i = 0; i < 4; ++i) s_[i] = mix(k += 0xBF58476D1CE4E5B9ULL);
    if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[0] = 1;
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform on [0,1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Standard normal via Box-Muller; consumes exactly two words per call so
  // the stream position is independent of the values drawn.
  double normal() {
    double u1 = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    const double u2 = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    const double r = std::sqrt(-2.0 * std::log(u1));
    return r * std::cos(6.283185307179586476925287 * u2);
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Unbiased integer in [0, bound) by rejection.
  std::size_t below(std::size_t bound) {
    const std::uint64_t b = bound;
    const std::uint64_t limit =
        std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % b;
    std::uint64_t r;
    do {
      r = next_u64();
    } while (r >= limit);
    return static_cast<std::size_t>(r % b);
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  // splitmix64 finalizer.
  static std::uint64_t mix(std::uint64_t x) {
    x ^= x >> 30;
    x *= 0xBF58476D1CE4E5B9ULL;
    x ^= x >> 27;
    x *= 0x94D049BB133111EBULL;
    x ^= x >> 31;
    return x;
  }

  std::uint64_t s_[4];
};

}  // namespace odsate
