#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "stokesmf/vec.hpp"

namespace stokesmf {

// Every random draw in the library comes from an Rng seeded through
// derive_seed(master, purpose, a, b).  The tuple identifies the consumer:
//
//   purpose      a                b
//   micro_init   particle count   run index within a sweep (0 standalone)
//   meso_init    cloud size       run index within a sweep (0 standalone)
//   test         free             free
//
// Streams depend only on these integers.  Distribution sampling below is
// hand-rolled on top of std::mt19937_64 (whose output sequence is pinned
// by the standard), so results are identical across platforms, runs, and
// thread counts; std::uniform_real_distribution and friends are
// implementation-defined and never used.
enum class StreamPurpose : std::uint64_t {
  micro_init = 1,
  meso_init = 2,
  test = 1000,
};

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t master, StreamPurpose purpose,
                                    std::uint64_t a = 0, std::uint64_t b = 0) noexcept {
  std::uint64_t z = master + 0x9e3779b97f4a7c15ull;
  z = mix64(z) ^ (static_cast<std::uint64_t>(purpose) + 0x2545f4914f6cdd1dull);
  z = mix64(z) ^ (a + 0xd1342543de82ef95ull);
  z = mix64(z) ^ (b + 0xaf251af3b0f025b5ull);
  return mix64(z);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Standard normal via the Marsaglia polar method (rejection); only sqrt
  // and log are involved, both correctly rounded or stable enough to be
  // reproducible on one platform and compiler.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = uniform(-1.0, 1.0);
      v = uniform(-1.0, 1.0);
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    have_spare_ = true;
    return u * f;
  }

  Vec3 normal3(double sigma = 1.0) { return {sigma * normal(), sigma * normal(), sigma * normal()}; }

  // Uniform in the closed ball of the given radius, by cube rejection.
  Vec3 uniform_in_ball(double radius) {
    while (true) {
      const Vec3 p{uniform(-1.0, 1.0), uniform(-1.0, 1.0), uniform(-1.0, 1.0)};
      if (p.squaredNorm() <= 1.0) return radius * p;
    }
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace stokesmf
