#pragma once

#include <cmath>
#include <cstdint>

namespace muchapro {

/// Counter-based generator: every (seed, stream) pair opens an independent
/// substream, so pixel-parallel sampling is reproducible regardless of the
/// number of workers.
class SubstreamRng {
 public:
  SubstreamRng(std::uint64_t seed, std::uint64_t stream)
      : state_(mix(seed + 0x9e3779b97f4a7c15ULL * (stream + 1))) {}

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix(state_);
  }

  /// Uniform in (0, 1].
  double next_unit() {
    return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1p-53;
  }

  /// One standard-normal pair (Box-Muller).
  void next_normal_pair(double& a, double& b) {
    const double u1 = next_unit();
    const double u2 = next_unit();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double th = 2.0 * M_PI * u2;
    a = r * std::cos(th);
    b = r * std::sin(th);
  }

  double next_normal() {
    double a, b;
    next_normal_pair(a, b);
    return a;
  }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xbf58476d1ce4e5b9ULL;
    z ^= z >> 27;
    z *= 0x94d049bb133111ebULL;
    z ^= z >> 31;
    return z;
  }

  std::uint64_t state_;
};

}  // namespace muchapro
