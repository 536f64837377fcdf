#pragma once

// Seeded random streams. Everything stochastic in the library is driven by
// std::mt19937_64, whose output sequence is fixed by the C++ standard, and by
// transforms written here rather than the implementation-defined
// std::*_distribution classes. A given seed therefore produces the same
// samples with any conforming standard library.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace resysid {

using Engine = std::mt19937_64;

/// SplitMix64 finalizer.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Derives an independent stream seed from a master seed and a stream index.
/// Stable across releases: trial k of an experiment always uses
/// derive_seed(master, k).
constexpr std::uint64_t derive_seed(std::uint64_t master,
                                    std::uint64_t stream) noexcept {
  return splitmix64(master ^ splitmix64(stream + 0x632BE59BD9B4E019ULL));
}

/// Uniform double in (0, 1] built from the top 53 bits.
inline double uniform_open0(Engine& eng) {
  return static_cast<double>((eng() >> 11) + 1) * 0x1.0p-53;
}

/// Standard normal variates by the Box-Muller transform; the second value of
/// each pair is cached.
class GaussianStream {
 public:
  explicit GaussianStream(std::uint64_t seed) : eng_(seed) {}

  double next() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double r = std::sqrt(-2.0 * std::log(uniform_open0(eng_)));
    const double phi = 2.0 * std::numbers::pi * uniform_open0(eng_);
    spare_ = r * std::sin(phi);
    has_spare_ = true;
    return r * std::cos(phi);
  }

 private:
  Engine eng_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace resysid
