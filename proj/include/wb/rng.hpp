#pragma once

#include <cstdint>

namespace wb {

// SplitMix64 (Steele, Lea, Flood 2014). Chosen because the whole pipeline
// must be bit-reproducible across platforms and thread counts: the standard
// library distributions are implementation-defined, so every draw here goes
// through this generator plus our own inverse-CDF transforms.
//
// Stream derivation rule: stream k of a run with master seed s is seeded
// with mix64(s) ^ mix64(k + 1). Replication k of a Monte Carlo run owns
// stream k; nothing else touches it, so results do not depend on how
// replications are scheduled across workers.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  static SplitMix64 stream(std::uint64_t master_seed, std::uint64_t index) {
    return SplitMix64(mix(master_seed) ^ mix(index + 1));
  }

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform on [0,1) with 53 random bits.
  double next_uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Unbiased draw from {0,...,bound-1} by rejection.
  std::uint64_t next_below(std::uint64_t bound) {
    const std::uint64_t threshold = (0 - bound) % bound;
    for (;;) {
      const std::uint64_t r = next_u64();
      if (r >= threshold) return r % bound;
    }
  }

 private:
  std::uint64_t state_;
};

}  // namespace wb
