#pragma once

#include <cstdint>
#include <random>

#include "amsim/geometry.hpp"

namespace amsim {

// Named sub-streams of a run seed. Every consumer of randomness owns one
// stream, so toggling a module on or off never shifts the draws seen by the
// others (required for matched-seed ablation pairs).
enum class RngStream : std::uint64_t {
  Landmarks = 0,
  ImuNoise = 1,
  ImuBias = 2,
  FtNoise = 3,
  PixelNoise = 4,
  VelocityInjection = 5,
  InitPerturbation = 6,
  Test = 7,
};

/// Deterministic RNG. The distribution transforms live here instead of
/// <random> adapters so sequences are identical across standard libraries.
class SeededRng {
 public:
  SeededRng(std::uint64_t seed, RngStream stream)
      : SeededRng(seed, static_cast<std::uint64_t>(stream)) {}
  SeededRng(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t next_u64();

  /// Uniform on [0, 1) with 53 random mantissa bits.
  double uniform();
  double uniform(double lo, double hi);

  /// Zero-mean gaussian via Box-Muller (no caching, one call = two draws).
  double gaussian(double sigma = 1.0);

  Vec3 gaussian_vec3(double sigma);
  Vec3 gaussian_vec3(const Vec3& sigma);

 private:
  std::mt19937_64 gen_;
};

}  // namespace amsim
