#pragma once

#include <cstddef>

#include "stokesmf/parallel.hpp"
#include "stokesmf/vec.hpp"

namespace stokesmf {

// Mobility kernel of free-space steady Stokes flow and its regularization
// by averaging over a solid ball ("blob") of radius d.
//
// oseen(x) = (1 / (8 pi |x|)) (I + x x^T / |x|^2),  homogeneous of degree -1.
//
// oseen_blob(x, d) is the exact mean of oseen over the ball of radius d
// centered at x.  Writing oseen = (1/8pi)(I Lap - grad grad)|x| and ball
// averaging |x| in closed form gives, with r = |x|:
//
//   r >= d:  (1/8pi) [ (1/r + d^2/(5 r^3)) I + (1/r^3 - 3 d^2/(5 r^5)) x x^T ]
//   r <  d:  (1/8pi) [ (2/d - 4 r^2/(5 d^3)) I + (2/(5 d^3)) x x^T ]
//
// The two pieces match in value and first derivative at r = d, the field is
// divergence free, oseen_blob(0, d) = I / (4 pi d), and each value is
// symmetric positive definite.  The relative deviation from the point
// kernel is exactly d^2/(5 r^2), so past kFarBlobFactor * d the point
// kernel is used instead; the jump there is 1/(5 kFarBlobFactor^2), about
// 3.1e-5 in relative terms, far below the kernel's own truncation scale.
inline constexpr double kFarBlobFactor = 80.0;

Mat3 oseen(const Vec3& x);
Mat3 oseen_blob(const Vec3& x, double d);

// u_k = sum_j oseen_blob(targets[k] - sources[j], d) * forces[j].
//
// exclude_self skips j == k and requires targets and sources to be views of
// the same set of points (it excludes by index, not by coincidence).  The
// inner sum always runs over j in ascending order within each target, so
// output bits do not depend on the pool's thread count.  out is resized to
// targets.size().
void superpose(const Vec3List& targets, const Vec3List& sources, const Vec3List& forces,
               double d, bool exclude_self, Vec3List& out, ThreadPool& pool);

Vec3List superpose(const Vec3List& targets, const Vec3List& sources, const Vec3List& forces,
                   double d, bool exclude_self, ThreadPool& pool);

}  // namespace stokesmf
