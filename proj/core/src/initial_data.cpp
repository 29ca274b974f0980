#include "stokesmf/initial_data.hpp"

#include <Eigen/SVD>

#include "stokesmf/errors.hpp"

namespace stokesmf {

void InitialDataSpec::validate() const {
  if (rho0 == Rho0Kind::uniform_ball && !(radius > 0.0))
    throw validation_error("initial.rho0.radius must be positive");
  if (rho0 == Rho0Kind::gaussian && !(sigma > 0.0))
    throw validation_error("initial.rho0.sigma must be positive");
  if (!(chi > 0.0)) throw validation_error("initial.chi must be positive");
  if (max_attempts < 1) throw validation_error("sampling.max_attempts must be at least 1");
  if (!g.allFinite() || !value.allFinite() || !omega.allFinite() || !matrix.allFinite())
    throw validation_error("initial data parameters must be finite");
}

double InitialDataSpec::support_diameter() const {
  return rho0 == Rho0Kind::uniform_ball ? 2.0 * radius : 6.0 * sigma;
}

Vec3 InitialDataSpec::sample_rho0(Rng& rng) const {
  if (rho0 == Rho0Kind::uniform_ball) return rng.uniform_in_ball(radius);
  const double cutoff2 = 9.0 * sigma * sigma;
  while (true) {
    const Vec3 x = rng.normal3(sigma);
    if (x.squaredNorm() <= cutoff2) return x;
  }
}

Vec3 InitialDataSpec::w0_at(const Vec3& x) const {
  switch (w0) {
    case W0Kind::constant:
      return value;
    case W0Kind::shear:
      return matrix * x;
    case W0Kind::rotation:
      return omega.cross(x);
    case W0Kind::affine:
      return value + matrix * x;
  }
  throw validation_error("initial.w0: unknown preset");
}

double InitialDataSpec::w0_lipschitz() const {
  switch (w0) {
    case W0Kind::constant:
      return 0.0;
    case W0Kind::rotation:
      return omega.norm();
    case W0Kind::shear:
    case W0Kind::affine:
      return matrix.jacobiSvd().singularValues()(0);
  }
  throw validation_error("initial.w0: unknown preset");
}

}  // namespace stokesmf
