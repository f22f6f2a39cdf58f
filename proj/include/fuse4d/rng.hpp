#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace fuse4d {

/// Derives independent substream seeds from (seed, stream, channel), so
/// per-frame generation can run in parallel yet stay reproducible.
inline std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t stream,
                                    std::uint64_t channel = 0) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1) + 0xBF58476D1CE4E5B9ULL * channel;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Seeded random stream with portable value derivation: uniforms come from
/// raw mt19937_64 output and normals from Box-Muller, independent of the
/// standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next_u64() { return eng_(); }

  /// Uniform double in [0, 1).
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [lo, hi], inclusive.
  int uniform_int(int lo, int hi) {
    const std::uint64_t range = static_cast<std::uint64_t>(hi - lo) + 1;
    const std::uint64_t bound = UINT64_MAX - UINT64_MAX % range;
    std::uint64_t v = eng_();
    while (v >= bound) v = eng_();
    return lo + static_cast<int>(v % range);
  }

  /// Standard normal via Box-Muller; the paired draw is cached.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    constexpr double two_pi = 6.283185307179586476925286766559;
    spare_ = r * std::sin(two_pi * u2);
    have_spare_ = true;
    return r * std::cos(two_pi * u2);
  }

 private:
  std::mt19937_64 eng_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace fuse4d
