#pragma once

#include <Eigen/Dense>

#include <vector>

namespace stokesmf {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

using Vec3List = std::vector<Vec3>;

// max_i |a_i|_2 over a list of vectors; 0 for an empty list.
inline double max_norm(const Vec3List& a) {
  double m = 0.0;
  for (const Vec3& v : a) m = std::max(m, v.norm());
  return m;
}

}  // namespace stokesmf
