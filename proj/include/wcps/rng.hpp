#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace wcps::rng {

// SplitMix64 finalizer (Steele, Lea, Flood 2014). Used as a stateless
// counter-based hash: mixing (seed, index, stream) gives an independent
// uniform per coordinate without any sequential state.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

constexpr std::uint64_t hash_coordinates(std::uint64_t seed, std::uint64_t index,
                                         std::uint64_t stream) noexcept {
  return mix64(mix64(mix64(seed) ^ index) + stream * 0xD1B54A32D192ED03ull);
}

// 53-bit uniform in [0, 1).
constexpr double to_unit(std::uint64_t bits) noexcept {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

constexpr double uniform_at(std::uint64_t seed, std::uint64_t index, std::uint64_t stream) noexcept {
  return to_unit(hash_coordinates(seed, index, stream));
}

// Stream identifiers for counter-based draws and seeded generators.
enum Stream : std::uint64_t {
  kSensorLoss = 0,
  kActuationLoss = 1,
  kProcessNoise = 2,
  kMeasurementNoise = 3,
  kInitialState = 4,
  kBroadcastLossBase = 1000,  // + sender index
  kAgentNoiseBase = 2000,     // + agent index
};

// Standard normal source: MT19937-64 feeding the Box–Muller transform on
// 53-bit uniforms. Both pieces are fully specified, so sequences are
// identical across standard libraries (std::normal_distribution is not).
class NormalSource {
 public:
  NormalSource(std::uint64_t seed, std::uint64_t stream)
      : engine_(hash_coordinates(seed, 0x5EEDull, stream)) {}

  double operator()() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    // u1 in (0, 1] keeps the logarithm finite.
    const double u1 = 1.0 - to_unit(engine_());
    const double u2 = to_unit(engine_());
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace wcps::rng
