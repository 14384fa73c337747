#pragma once

// Deterministic, platform-independent noise. The contract that makes
// ensemble output byte-identical across runs and machines:
//
//   out(seed, k)  = splitmix64 finalizer of (seed + (k+1) * 0x9E3779B97F4A7C15)
//                   (equivalently: the k-th output of a splitmix64 stream
//                   seeded with `seed`)
//   uniform(k)    = ((out(seed, k) >> 11) + 1) * 2^-53, a value in (0, 1]
//   normals       = Box-Muller pairs over consecutive uniforms
//   path seeds    = seed_i = out(ensemble_seed, i)
//
// Counter indexing (rather than mutable stream state) is what makes path
// seeds order-independent and ensembles parallelizable without coordination.

#include <cmath>
#include <cstdint>

namespace liepoisson::rng {

inline constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

// splitmix64 output finalizer.
inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// k-th output of the splitmix64 stream with the given seed.
inline std::uint64_t output_at(std::uint64_t seed, std::uint64_t k) {
  return mix64(seed + (k + 1) * kGamma);
}

// Derived seed for path i of an ensemble.
inline std::uint64_t path_seed(std::uint64_t ensemble_seed, std::uint64_t i) {
  return output_at(ensemble_seed, i);
}

// Uniform draw in (0, 1]; strictly positive so log() below is safe.
inline double uniform_at(std::uint64_t seed, std::uint64_t k) {
  return static_cast<double>((output_at(seed, k) >> 11) + 1) * 0x1.0p-53;
}

// Standard normal stream: Box-Muller over the counter-indexed uniforms.
class NormalStream {
 public:
  explicit NormalStream(std::uint64_t seed) : seed_(seed) {}

  double next() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = uniform_at(seed_, counter_++);
    const double u2 = uniform_at(seed_, counter_++);
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace liepoisson::rng
