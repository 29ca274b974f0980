#pragma once

#include <cstdint>

#include "stokesmf/rng.hpp"
#include "stokesmf/vec.hpp"

namespace stokesmf {

enum class Rho0Kind { uniform_ball, gaussian };
enum class W0Kind { constant, shear, rotation, affine };

// Declarative initial data: a compactly supported probability density for
// positions and a Lipschitz velocity profile, plus gravity and the
// hard-core exclusion factor used by the particle sampler.
struct InitialDataSpec {
  Rho0Kind rho0 = Rho0Kind::uniform_ball;
  double radius = 1.0;  // uniform_ball support radius
  double sigma = 1.0;   // gaussian scale; support truncated at |x| = 3 sigma

  W0Kind w0 = W0Kind::shear;
  Vec3 value = Vec3::Zero();  // constant part (constant, affine)
  Mat3 matrix = (Mat3() << 0, 0, 1, 0, 0, 0, 0, 0, 0).finished();  // linear part (shear, affine)
  Vec3 omega = Vec3::UnitZ();  // rotation rate (rotation)

  Vec3 g = -Vec3::UnitZ();
  double chi = 0.2;        // exclusion radius chi * N^(-1/2)
  int max_attempts = 10000;  // per-point rejection budget

  void validate() const;

  // Diameter of rho0's support: 2*radius or 6*sigma.
  double support_diameter() const;

  // One draw from rho0 (uniform ball, or isotropic gaussian rejected to
  // |x| <= 3 sigma).
  Vec3 sample_rho0(Rng& rng) const;

  Vec3 w0_at(const Vec3& x) const;

  // Exact Lipschitz constant of the w0 preset: 0, |A|_op, |omega|, |A|_op.
  double w0_lipschitz() const;
};

}  // namespace stokesmf
