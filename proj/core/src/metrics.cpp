#include "stokesmf/metrics.hpp"

#include <cmath>
#include <limits>

#include "stokesmf/errors.hpp"

namespace stokesmf {

double s_beta(const Vec3List& x, double beta) {
  const int n = static_cast<int>(x.size());
  if (n < 2) throw validation_error("s_beta: at least two points required");
  if (!(beta > 0.0)) throw validation_error("s_beta: beta must be positive");
  const double half_beta = 0.5 * beta;
  double worst = 0.0;
  for (int i = 0; i < n; ++i) {
    double sum = 0.0;
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      const double r2 = (x[i] - x[j]).squaredNorm();
      if (r2 <= 0.0) throw validation_error("s_beta: coincident points");
      sum += std::pow(r2, -half_beta);
    }
    worst = std::max(worst, sum);
  }
  return worst;
}

double min_distance(const Vec3List& x) {
  const int n = static_cast<int>(x.size());
  if (n < 2) throw validation_error("min_distance: at least two points required");
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      best = std::min(best, (x[i] - x[j]).squaredNorm());
    }
  }
  return std::sqrt(best);
}

double v_norm2(const Vec3List& v) {
  double sum = 0.0;
  for (const Vec3& vi : v) sum += vi.squaredNorm();
  return std::sqrt(sum);
}

double v_norm_inf(const Vec3List& v) { return max_norm(v); }

namespace {

// Single fused pair scan: d_min plus the beta = 2, 4, 6 interaction sums.
struct PairScan {
  double dmin = std::numeric_limits<double>::infinity();
  double s2 = 0.0;
  double s4 = 0.0;
  double s6 = 0.0;
};

PairScan pair_scan(const Vec3List& x) {
  const int n = static_cast<int>(x.size());
  PairScan out;
  if (n < 2) return out;
  std::vector<double> r2sum(n, 0.0), r4sum(n, 0.0), r6sum(n, 0.0);
  double best2 = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double r2 = (x[i] - x[j]).squaredNorm();
      if (r2 <= 0.0) throw validation_error("diagnostics: coincident points");
      best2 = std::min(best2, r2);
      const double inv2 = 1.0 / r2;
      const double inv4 = inv2 * inv2;
      const double inv6 = inv4 * inv2;
      r2sum[i] += inv2;
      r2sum[j] += inv2;
      r4sum[i] += inv4;
      r4sum[j] += inv4;
      r6sum[i] += inv6;
      r6sum[j] += inv6;
    }
  }
  out.dmin = std::sqrt(best2);
  for (int i = 0; i < n; ++i) {
    out.s2 = std::max(out.s2, r2sum[i]);
    out.s4 = std::max(out.s4, r4sum[i]);
    out.s6 = std::max(out.s6, r6sum[i]);
  }
  return out;
}

}  // namespace

double buckling(const MicroState& state, const ForceSet& forces) {
  if (static_cast<int>(forces.F.size()) != state.n())
    throw validation_error("buckling: force set does not match state");
  Vec3List nf(forces.F.size());
  for (std::size_t i = 0; i < forces.F.size(); ++i) nf[i] = forces.scale * forces.F[i];
  const double s2 = state.n() >= 2 ? s_beta(state.X, 2.0) : 0.0;
  return v_norm_inf(nf) + v_norm_inf(state.V) + s2 / static_cast<double>(state.n());
}

DiagnosticsRecord micro_diagnostics(const MicroState& state, const ForceSet& forces) {
  if (static_cast<int>(forces.F.size()) != state.n())
    throw validation_error("diagnostics: force set does not match state");
  const PairScan scan = pair_scan(state.X);
  DiagnosticsRecord rec;
  rec.t = state.t;
  rec.d_min = scan.dmin;
  rec.s2_over_n = scan.s2 / static_cast<double>(state.n());
  rec.s4 = scan.s4;
  rec.s6 = scan.s6;
  rec.v_inf = v_norm_inf(state.V);
  rec.v2 = v_norm2(state.V);
  double nf = 0.0;
  for (const Vec3& f : forces.F) nf = std::max(nf, f.norm());
  rec.nf_inf = forces.scale * nf;
  rec.buckling = rec.nf_inf + rec.v_inf + rec.s2_over_n;
  return rec;
}

DiagnosticsRecord meso_diagnostics(const LagrangianCloud& cloud, const FluidField& field,
                                   std::optional<double> lipschitz) {
  if (field.u.size() != cloud.Y.size())
    throw validation_error("diagnostics: fluid field does not match cloud");
  const PairScan scan = pair_scan(cloud.Y);
  DiagnosticsRecord rec;
  rec.t = cloud.t;
  rec.d_min = scan.dmin;
  rec.s2_over_n = scan.s2 / static_cast<double>(cloud.size());
  rec.s4 = scan.s4;
  rec.s6 = scan.s6;
  rec.v_inf = v_norm_inf(cloud.W);
  rec.v2 = v_norm2(cloud.W);
  double drag = 0.0;
  for (int k = 0; k < cloud.size(); ++k)
    drag = std::max(drag, (cloud.W[k] - field.u[k]).norm());
  rec.nf_inf = drag;
  rec.buckling = rec.nf_inf + rec.v_inf + rec.s2_over_n;
  rec.lipschitz_proxy = lipschitz;
  return rec;
}

}  // namespace stokesmf
