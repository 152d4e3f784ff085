#pragma once

#include <cstdint>
#include <random>

namespace rotdet {

/// Seeded pseudo-random source with a platform-independent output sequence.
///
/// std::mt19937_64 has a fully specified sequence; the standard distributions do not, so
/// uniform and normal variates are derived here directly from the raw 64-bit words.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [lo, hi].
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<std::int64_t>(engine_() % span);
  }

  bool bernoulli(double p) { return uniform() < p; }

  /// Box-Muller; one of each generated pair is cached.
  double normal(double mean = 0.0, double stddev = 1.0);

  /// Knuth's multiplication method; intended for small means.
  std::uint64_t poisson(double mean);

  /// Independent generator for a sub-stream, derived deterministically from this one.
  Rng split() { return Rng(engine_() ^ 0x9e3779b97f4a7c15ULL); }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace rotdet
