#include "stokesmf/meso.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <string>

#include "stokesmf/errors.hpp"
#include "stokesmf/oseen.hpp"

namespace stokesmf {

void LagrangianCloud::validate() const {
  if (Y.empty()) throw validation_error("cloud: at least one point required");
  if (Y.size() != W.size() || Y.size() != m.size())
    throw validation_error("cloud: positions, velocities, masses differ in length");
  if (!(delta > 0.0)) throw validation_error("cloud: delta must be positive");
  double total = 0.0;
  for (double mk : m) {
    if (!(mk >= 0.0)) throw validation_error("cloud: masses must be nonnegative");
    total += mk;
  }
  if (std::abs(total - 1.0) > 1e-12)
    throw validation_error("cloud: masses must sum to 1 (got " + std::to_string(total) + ")");
}

LagrangianCloud init_cloud(const InitialDataSpec& spec, int m, std::uint64_t seed, double delta) {
  spec.validate();
  if (m < 1) throw validation_error("init_cloud: M must be at least 1");
  if (!(delta > 0.0)) throw validation_error("init_cloud: delta must be positive");
  Rng rng(seed);
  LagrangianCloud cloud;
  cloud.delta = delta;
  cloud.t = 0.0;
  cloud.Y.reserve(m);
  cloud.W.reserve(m);
  for (int k = 0; k < m; ++k) cloud.Y.push_back(spec.sample_rho0(rng));
  for (const Vec3& y : cloud.Y) cloud.W.push_back(spec.w0_at(y));
  cloud.m.assign(m, 1.0 / static_cast<double>(m));
  cloud.validate();
  return cloud;
}

LagrangianCloud init_cloud_coupled(const MicroState& state, double delta) {
  state.validate();
  if (!(delta > 0.0)) throw validation_error("init_cloud_coupled: delta must be positive");
  LagrangianCloud cloud;
  cloud.Y = state.X;
  cloud.W = state.V;
  cloud.m.assign(state.n(), 1.0 / static_cast<double>(state.n()));
  cloud.delta = delta;
  cloud.t = state.t;
  cloud.validate();
  return cloud;
}

namespace {

// One application of the weighted blob operator: out_k = sum_j
// oseen_blob(Y_k - Y_j, delta) m_j a_j.  Mass weighting is folded into the
// sources so the kernel summation stays a single fused pass.
void apply_weighted(const LagrangianCloud& cloud, const Vec3List& a, Vec3List& weighted,
                    Vec3List& out, ThreadPool& pool) {
  const int m = cloud.size();
  weighted.resize(m);
  for (int j = 0; j < m; ++j) weighted[j] = cloud.m[j] * a[j];
  superpose(cloud.Y, cloud.Y, weighted, cloud.delta, /*exclude_self=*/false, out, pool);
}

FluidField solve_fluid_dense(const LagrangianCloud& cloud, ThreadPool& pool) {
  const int m = cloud.size();
  if (m > 512) throw validation_error("dense fluid solve limited to M <= 512");
  // (I + K diag(m)) u = K diag(m) W with K_{kj} = oseen_blob(Y_k - Y_j, delta).
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(3 * m, 3 * m);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(3 * m);
  for (int k = 0; k < m; ++k) {
    for (int j = 0; j < m; ++j) {
      const Mat3 block = cloud.m[j] * oseen_blob(cloud.Y[k] - cloud.Y[j], cloud.delta);
      a.block<3, 3>(3 * k, 3 * j) += block;
      rhs.segment<3>(3 * k) += block * cloud.W[j];
    }
  }
  const Eigen::VectorXd sol = a.partialPivLu().solve(rhs);
  FluidField field;
  field.u.resize(m);
  for (int k = 0; k < m; ++k) field.u[k] = sol.segment<3>(3 * k);

  Vec3List diff(m), weighted, ku;
  for (int k = 0; k < m; ++k) diff[k] = cloud.W[k] - field.u[k];
  apply_weighted(cloud, diff, weighted, ku, pool);
  for (int k = 0; k < m; ++k)
    field.residual = std::max(field.residual, (field.u[k] - ku[k]).norm());
  field.iterations = 1;
  return field;
}

}  // namespace

FluidField solve_fluid(const LagrangianCloud& cloud, const FluidOptions& opts, ThreadPool& pool) {
  cloud.validate();
  if (!opts.coupling) {
    FluidField field;
    field.u.assign(cloud.size(), Vec3::Zero());
    return field;
  }
  if (!(opts.tol > 0.0)) throw validation_error("fluid tol must be positive");
  if (opts.max_iter < 1) throw validation_error("fluid max_iter must be at least 1");
  if (opts.dense_direct) return solve_fluid_dense(cloud, pool);

  const int m = cloud.size();
  FluidField field;
  field.u.assign(m, Vec3::Zero());
  Vec3List diff(m), weighted, ku;
  Vec3List residual(m);
  double theta = 1.0;
  double prev_res = std::numeric_limits<double>::infinity();
  for (int it = 1; it <= opts.max_iter; ++it) {
    for (int k = 0; k < m; ++k) diff[k] = cloud.W[k] - field.u[k];
    apply_weighted(cloud, diff, weighted, ku, pool);
    double res = 0.0;
    for (int k = 0; k < m; ++k) {
      residual[k] = field.u[k] - ku[k];
      res = std::max(res, residual[k].norm());
    }
    if (res <= opts.tol) {
      field.residual = res;
      field.iterations = it;
      return field;
    }
    if (res > prev_res) theta *= 0.5;
    prev_res = res;
    for (int k = 0; k < m; ++k) field.u[k] -= theta * residual[k];
  }
  throw solver_error("fluid fixed point: no convergence after " + std::to_string(opts.max_iter) +
                         " iterations (last residual " + std::to_string(prev_res) +
                         "; delta may be too small for this cloud)",
                     opts.max_iter, prev_res);
}

namespace {

struct CloudDerivative {
  Vec3List dY;
  Vec3List dW;
};

CloudDerivative cloud_rhs(const LagrangianCloud& cloud, const Vec3& g, const FluidOptions& opts,
                          ThreadPool& pool, CloudStepReport* report) {
  FluidField field = solve_fluid(cloud, opts, pool);
  if (report) {
    report->max_iterations = std::max(report->max_iterations, field.iterations);
    report->max_residual = std::max(report->max_residual, field.residual);
  }
  CloudDerivative der;
  der.dY = cloud.W;
  der.dW.resize(cloud.size());
  for (int k = 0; k < cloud.size(); ++k) der.dW[k] = g + field.u[k] - cloud.W[k];
  return der;
}

LagrangianCloud cloud_advanced(const LagrangianCloud& base, const CloudDerivative& der, double h) {
  LagrangianCloud out;
  out.m = base.m;
  out.delta = base.delta;
  out.t = base.t + h;
  const int m = base.size();
  out.Y.resize(m);
  out.W.resize(m);
  for (int k = 0; k < m; ++k) {
    out.Y[k] = base.Y[k] + h * der.dY[k];
    out.W[k] = base.W[k] + h * der.dW[k];
  }
  return out;
}

}  // namespace

LagrangianCloud step_cloud(const LagrangianCloud& cloud, double dt, const Vec3& g,
                           const FluidOptions& opts, ThreadPool& pool, CloudStepReport* report) {
  if (!(dt > 0.0)) throw validation_error("step_cloud: dt must be positive");
  const CloudDerivative k1 = cloud_rhs(cloud, g, opts, pool, report);
  const CloudDerivative k2 = cloud_rhs(cloud_advanced(cloud, k1, 0.5 * dt), g, opts, pool, report);
  const CloudDerivative k3 = cloud_rhs(cloud_advanced(cloud, k2, 0.5 * dt), g, opts, pool, report);
  const CloudDerivative k4 = cloud_rhs(cloud_advanced(cloud, k3, dt), g, opts, pool, report);

  LagrangianCloud out;
  out.m = cloud.m;
  out.delta = cloud.delta;
  out.t = cloud.t + dt;
  const int m = cloud.size();
  out.Y.resize(m);
  out.W.resize(m);
  const double w = dt / 6.0;
  for (int k = 0; k < m; ++k) {
    out.Y[k] = cloud.Y[k] + w * (k1.dY[k] + 2.0 * k2.dY[k] + 2.0 * k3.dY[k] + k4.dY[k]);
    out.W[k] = cloud.W[k] + w * (k1.dW[k] + 2.0 * k2.dW[k] + 2.0 * k3.dW[k] + k4.dW[k]);
  }
  return out;
}

double lipschitz_monitor(const LagrangianCloud& cloud, int k_neighbors) {
  cloud.validate();
  const int m = cloud.size();
  if (m < 2) throw validation_error("lipschitz_monitor: at least two points required");
  const int k = std::min(k_neighbors, m - 1);
  double worst = 0.0;
  std::vector<std::pair<double, int>> heap;  // max-heap on distance, k nearest
  for (int a = 0; a < m; ++a) {
    heap.clear();
    for (int b = 0; b < m; ++b) {
      if (b == a) continue;
      const double dist2 = (cloud.Y[a] - cloud.Y[b]).squaredNorm();
      if (static_cast<int>(heap.size()) < k) {
        heap.emplace_back(dist2, b);
        std::push_heap(heap.begin(), heap.end());
      } else if (dist2 < heap.front().first) {
        std::pop_heap(heap.begin(), heap.end());
        heap.back() = {dist2, b};
        std::push_heap(heap.begin(), heap.end());
      }
    }
    for (const auto& [dist2, b] : heap) {
      if (dist2 <= 0.0)
        throw solver_error("lipschitz_monitor: coincident cloud points (crossing detected)");
      const double quot = (cloud.W[a] - cloud.W[b]).norm() / std::sqrt(dist2);
      worst = std::max(worst, quot);
    }
  }
  return worst;
}

}  // namespace stokesmf
