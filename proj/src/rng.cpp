#include "amsim/rng.hpp"

#include <cmath>

namespace amsim {
namespace {

// splitmix64, used only to spread (seed, stream) into a well-mixed engine seed
std::uint64_t splitmix64(std::uint64_t& x) {
  x += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace

SeededRng::SeededRng(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t s = seed;
  std::uint64_t mixed = splitmix64(s);
  s ^= stream * 0x9e3779b97f4a7c15ull;
  mixed ^= splitmix64(s);
  gen_.seed(mixed);
}

std::uint64_t SeededRng::next_u64() { return gen_(); }

double SeededRng::uniform() {
  return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
}

double SeededRng::uniform(double lo, double hi) {
  return lo + (hi - lo) * uniform();
}

double SeededRng::gaussian(double sigma) {
  // u1 in (0, 1] so the log is finite
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  return sigma * r * std::cos(2.0 * M_PI * u2);
}

Vec3 SeededRng::gaussian_vec3(double sigma) {
  return Vec3(gaussian(sigma), gaussian(sigma), gaussian(sigma));
}

Vec3 SeededRng::gaussian_vec3(const Vec3& sigma) {
  return Vec3(gaussian(sigma.x()), gaussian(sigma.y()), gaussian(sigma.z()));
}

}  // namespace amsim
