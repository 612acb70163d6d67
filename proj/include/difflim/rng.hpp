#pragma once

#include <cstdint>
#include <random>

namespace difflim {

// Stream assignment used by every ensemble:
//
//   mix(seed, index) = finalize(seed + 0x9E3779B97F4A7C15 * (index + 1))
//   finalize(z): z ^= z >> 30; z *= 0xBF58476D1CE4E5B9;
//                z ^= z >> 27; z *= 0x94D049BB133111EB;
//                z ^= z >> 31
//
// (the SplitMix64 output function). Path i of an ensemble seeded with s draws
// its increments from Engine(mix(s, i)), independent of worker scheduling.
constexpr std::uint64_t splitmix64_finalize(std::uint64_t z) noexcept {
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ULL;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBULL;
  z ^= z >> 31;
  return z;
}

constexpr std::uint64_t mix(std::uint64_t seed, std::uint64_t index) noexcept {
  return splitmix64_finalize(seed + 0x9E3779B97F4A7C15ULL * (index + 1));
}

using Engine = std::mt19937_64;

// Source of standard Wiener increments for one path.
class GaussianStream {
 public:
  explicit GaussianStream(std::uint64_t seed) : engine_(seed) {}

  double increment(double sqrt_h) { return sqrt_h * normal_(engine_); }
  // Sum of m increments over a finer grid of spacing (sqrt_fine)^2.
  double increment(double sqrt_fine, unsigned m) {
    double z = 0.0;
    for (unsigned k = 0; k < m; ++k) z += normal_(engine_);
    return sqrt_fine * z;
  }
  double standard() { return normal_(engine_); }
  Engine& engine() noexcept { return engine_; }

 private:
  Engine engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace difflim
