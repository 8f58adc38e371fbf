#pragma once

#include <cstdint>

namespace scs {

// SplitMix64. Used everywhere randomness must be reproducible across
// platforms and standard libraries (std:: distributions are not).
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) { return n == 0 ? 0 : next() % n; }

 private:
  std::uint64_t state_;
};

/// Stateless mix of several keys into one 64-bit value.
inline std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b) {
  SplitMix64 g(a ^ (b * 0xD6E8FEB86659FD93ULL + 0x632BE59BD9B4E019ULL));
  return g.next();
}

}  // namespace scs
