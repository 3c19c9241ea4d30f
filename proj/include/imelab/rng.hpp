#pragma once

#include <cstdint>

namespace imelab {

// Deterministic generator with platform-independent output (splitmix64
// core).  std::uniform_real_distribution is implementation-defined, which
// would break byte-stable reports across toolchains, so sampling is done
// explicitly here.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller (unpaired; one trig call per sample).
  double normal();

  // Independent stream derived from this seed and a stream id.
  Rng fork(std::uint64_t stream) const;

 private:
  std::uint64_t state_;
};

}  // namespace imelab
