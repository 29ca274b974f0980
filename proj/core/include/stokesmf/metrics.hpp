#pragma once

#include <optional>

#include "stokesmf/meso.hpp"
#include "stokesmf/micro.hpp"
#include "stokesmf/vec.hpp"

namespace stokesmf {

// max_i sum_{j != i} |X_i - X_j|^(-beta).  Exact O(N^2) double loop.
// Requires N >= 2 and strictly positive pairwise distances.
double s_beta(const Vec3List& x, double beta);

// min_{i != j} |X_i - X_j|.  Requires N >= 2.
double min_distance(const Vec3List& x);

double v_norm2(const Vec3List& v);    // sqrt(sum |V_i|^2)
double v_norm_inf(const Vec3List& v);  // max |V_i|

// |NF|_inf + |V|_inf + S_2/N, the bootstrap quantity whose boundedness
// keeps the dynamics in the validated regime.  S_2 is 0 for N = 1 (empty
// interaction sum) so the single-particle analytic runs stay meaningful.
double buckling(const MicroState& state, const ForceSet& forces);

// One time sample of every tracked scalar.  For particle runs nf_inf is
// max_i |N F_i|; for cloud runs the same slot holds max_k |W_k - u_k| (the
// per-unit-mass drag magnitude, the direct analogue) and lipschitz_proxy
// is populated.  d_min is +infinity and the S sums are 0 when only one
// point exists.
struct DiagnosticsRecord {
  double t = 0.0;
  double d_min = 0.0;
  double s2_over_n = 0.0;
  double s4 = 0.0;
  double s6 = 0.0;
  double v_inf = 0.0;
  double v2 = 0.0;
  double nf_inf = 0.0;
  double buckling = 0.0;
  std::optional<double> lipschitz_proxy;
};

DiagnosticsRecord micro_diagnostics(const MicroState& state, const ForceSet& forces);
DiagnosticsRecord meso_diagnostics(const LagrangianCloud& cloud, const FluidField& field,
                                   std::optional<double> lipschitz);

}  // namespace stokesmf
