// Seeded random number generation: SplitMix64 streams and Box-Muller normals.
//
// Everything stochastic in this library draws from these streams, never from
// std::random, so that results are identical across platforms and standard
// library versions. Substreams derived from (seed, index) let Monte Carlo
// trials run in any order, on any number of threads, with the same output.
#pragma once

#include <cmath>
#include <cstdint>

namespace rankscope {

inline constexpr std::uint64_t kSplitMixGamma = 0x9E3779B97F4A7C15ull;

// Finalizer from Steele, Lea & Flood's SplitMix64.
inline std::uint64_t splitmix_fini(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    state_ += kSplitMixGamma;
    return splitmix_fini(state_);
  }

  // Uniform in (0, 1]; never returns 0 so log(u) is always finite.
  double uniform01() {
    return static_cast<double>((next() >> 11) + 1) * 0x1.0p-53;
  }

 private:
  std::uint64_t state_;
};

// Independent stream for (seed, index). Mixing the index through the
// finalizer before xoring keeps adjacent indices decorrelated.
inline std::uint64_t substream(std::uint64_t seed, std::uint64_t index) {
  return splitmix_fini(seed ^ splitmix_fini(kSplitMixGamma * (index + 1)));
}

// Standard normals via Box-Muller, one spare cached between calls.
class GaussianStream {
 public:
  explicit GaussianStream(std::uint64_t seed) : sm_(seed) {}

  double next() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = sm_.uniform01();
    const double u2 = sm_.uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  std::uint64_t next_raw() { return sm_.next(); }

 private:
  SplitMix64 sm_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace rankscope
