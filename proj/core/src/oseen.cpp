#include "stokesmf/oseen.hpp"

#include <cmath>
#include <numbers>

#include "stokesmf/errors.hpp"

namespace stokesmf {

namespace {

constexpr double kInv8Pi = 1.0 / (8.0 * std::numbers::pi);

// Coefficient pair (a, b) such that T(x) f = kInv8Pi * (a f + b (x . f) x).
struct Coeffs {
  double a;
  double b;
};

inline Coeffs blob_coeffs(double r2, double d) {
  const double d2 = d * d;
  if (r2 < d2) {
    const double inv_d = 1.0 / d;
    const double inv_d3 = inv_d * inv_d * inv_d;
    return {2.0 * inv_d - 0.8 * r2 * inv_d3, 0.4 * inv_d3};
  }
  const double inv_r = 1.0 / std::sqrt(r2);
  const double inv_r2 = inv_r * inv_r;
  const double inv_r3 = inv_r * inv_r2;
  const double far2 = kFarBlobFactor * kFarBlobFactor * d2;
  const double blob = r2 <= far2 ? 0.2 * d2 : 0.0;
  return {inv_r + blob * inv_r3, inv_r3 - 3.0 * blob * inv_r3 * inv_r2};
}

}  // namespace

namespace {

// x x^T evaluated into storage before scaling, so the result is exactly
// symmetric (scaling the vector first would round (s x_i) x_j and
// (s x_j) x_i differently).
inline Mat3 dyad_combination(const Vec3& x, double a, double b) {
  const Mat3 outer = x * x.transpose();
  Mat3 t = (kInv8Pi * a) * Mat3::Identity();
  t += (kInv8Pi * b) * outer;
  return t;
}

}  // namespace

Mat3 oseen(const Vec3& x) {
  const double r2 = x.squaredNorm();
  if (r2 <= 0.0) throw validation_error("oseen: evaluation at the origin is singular");
  const double inv_r = 1.0 / std::sqrt(r2);
  return dyad_combination(x, inv_r, inv_r / r2);
}

Mat3 oseen_blob(const Vec3& x, double d) {
  if (!(d > 0.0)) throw validation_error("oseen_blob: blob radius must be positive");
  const auto [a, b] = blob_coeffs(x.squaredNorm(), d);
  return dyad_combination(x, a, b);
}

namespace {

// Structure-of-arrays scratch so the pair loop below stays vectorizable.
struct Scratch {
  std::vector<double> sx, sy, sz, fx, fy, fz;
};

thread_local Scratch g_scratch;

// Accumulates, into (ux, uy, uz), the field at target point (tx, ty, tz)
// from sources [j0, j1).  Branch-free in the hot region: coefficient
// selection is by conditional moves, and the lanes discarded by a select
// may hold inf (1/sqrt(0) for a coincident interior pair) without harm.
inline void accumulate_range(const Scratch& s, std::size_t j0, std::size_t j1, double tx,
                             double ty, double tz, double d, double& ux, double& uy,
                             double& uz) {
  const double d2 = d * d;
  const double inv_d = 1.0 / d;
  const double inv_d3 = inv_d * inv_d * inv_d;
  const double a_in0 = 2.0 * inv_d;
  const double b_in = 0.4 * inv_d3;
  const double far2 = kFarBlobFactor * kFarBlobFactor * d2;
  double ax = 0.0, ay = 0.0, az = 0.0;
  for (std::size_t j = j0; j < j1; ++j) {
    const double dx = tx - s.sx[j];
    const double dy = ty - s.sy[j];
    const double dz = tz - s.sz[j];
    const double r2 = dx * dx + dy * dy + dz * dz;
    const double inv_r = 1.0 / std::sqrt(r2);
    const double inv_r2 = inv_r * inv_r;
    const double inv_r3 = inv_r * inv_r2;
    const double blob = r2 <= far2 ? 0.2 * d2 : 0.0;
    const double a_out = inv_r + blob * inv_r3;
    const double b_out = inv_r3 - 3.0 * blob * inv_r3 * inv_r2;
    const bool interior = r2 < d2;
    const double a = interior ? a_in0 - 0.8 * r2 * inv_d3 : a_out;
    const double b = interior ? b_in : b_out;
    const double fdx = s.fx[j];
    const double fdy = s.fy[j];
    const double fdz = s.fz[j];
    const double proj = b * (dx * fdx + dy * fdy + dz * fdz);
    ax += a * fdx + proj * dx;
    ay += a * fdy + proj * dy;
    az += a * fdz + proj * dz;
  }
  ux += ax;
  uy += ay;
  uz += az;
}

}  // namespace

void superpose(const Vec3List& targets, const Vec3List& sources, const Vec3List& forces,
               double d, bool exclude_self, Vec3List& out, ThreadPool& pool) {
  if (!(d > 0.0)) throw validation_error("superpose: blob radius must be positive");
  if (sources.size() != forces.size())
    throw validation_error("superpose: sources and forces must have equal length");
  if (exclude_self && targets.size() != sources.size())
    throw validation_error("superpose: exclude_self requires targets == sources");
  const std::size_t n_src = sources.size();
  out.assign(targets.size(), Vec3::Zero());
  if (n_src == 0 || targets.empty()) return;

  Scratch& s = g_scratch;
  s.sx.resize(n_src);
  s.sy.resize(n_src);
  s.sz.resize(n_src);
  s.fx.resize(n_src);
  s.fy.resize(n_src);
  s.fz.resize(n_src);
  for (std::size_t j = 0; j < n_src; ++j) {
    s.sx[j] = sources[j].x();
    s.sy[j] = sources[j].y();
    s.sz[j] = sources[j].z();
    s.fx[j] = forces[j].x();
    s.fy[j] = forces[j].y();
    s.fz[j] = forces[j].z();
  }

  pool.parallel_for(targets.size(), [&](std::size_t k0, std::size_t k1) {
    for (std::size_t k = k0; k < k1; ++k) {
      const double tx = targets[k].x();
      const double ty = targets[k].y();
      const double tz = targets[k].z();
      double ux = 0.0, uy = 0.0, uz = 0.0;
      if (exclude_self) {
        accumulate_range(s, 0, k, tx, ty, tz, d, ux, uy, uz);
        accumulate_range(s, k + 1, n_src, tx, ty, tz, d, ux, uy, uz);
      } else {
        accumulate_range(s, 0, n_src, tx, ty, tz, d, ux, uy, uz);
      }
      out[k] = Vec3{kInv8Pi * ux, kInv8Pi * uy, kInv8Pi * uz};
    }
  });
}

Vec3List superpose(const Vec3List& targets, const Vec3List& sources, const Vec3List& forces,
                   double d, bool exclude_self, ThreadPool& pool) {
  Vec3List out;
  superpose(targets, sources, forces, d, exclude_self, out, pool);
  return out;
}

}  // namespace stokesmf
