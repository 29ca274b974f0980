#include "stokesmf/micro.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "stokesmf/errors.hpp"
#include "stokesmf/metrics.hpp"

namespace stokesmf {

namespace {

constexpr double kSixPi = 6.0 * std::numbers::pi;

}  // namespace

void MicroState::validate() const {
  if (X.empty()) throw validation_error("micro state: at least one particle required");
  if (X.size() != V.size())
    throw validation_error("micro state: positions and velocities differ in length");
  const double target = 1.0 / (kSixPi * static_cast<double>(n()));
  if (std::abs(R - target) > 1e-12 * target)
    throw validation_error("micro state: radius breaks the N*R = 1/(6 pi) coupling");
}

int hard_core_threshold(double chi) {
  // chi * N^(-1/2) >= 8/(6 pi N)  <=>  N >= (8 / (6 pi chi))^2
  const double root = 8.0 / (kSixPi * chi);
  return static_cast<int>(std::ceil(root * root));
}

MicroState init_particles(const InitialDataSpec& spec, int n, std::uint64_t seed) {
  spec.validate();
  if (n < 1) throw validation_error("init_particles: N must be at least 1");
  const double r_ex = spec.chi / std::sqrt(static_cast<double>(n));
  const double r_ex2 = r_ex * r_ex;
  Rng rng(seed);
  MicroState state;
  state.R = 1.0 / (kSixPi * static_cast<double>(n));
  state.t = 0.0;
  state.X.reserve(n);
  state.V.reserve(n);
  for (int i = 0; i < n; ++i) {
    bool placed = false;
    for (int attempt = 0; attempt < spec.max_attempts; ++attempt) {
      const Vec3 candidate = spec.sample_rho0(rng);
      bool clear = true;
      for (const Vec3& x : state.X) {
        if ((candidate - x).squaredNorm() < r_ex2) {
          clear = false;
          break;
        }
      }
      if (clear) {
        state.X.push_back(candidate);
        placed = true;
        break;
      }
    }
    if (!placed)
      throw solver_error("init_particles: exceeded " + std::to_string(spec.max_attempts) +
                         " placement attempts at particle " + std::to_string(i) +
                         " (exclusion factor too large for the density)");
  }
  for (const Vec3& x : state.X) state.V.push_back(spec.w0_at(x));
  state.validate();
  return state;
}

double blob_radius_for(const MicroState& state, double kappa, double dmin) {
  if (!(kappa > 0.0)) throw validation_error("blob kappa must be positive");
  const double lo = 4.0 * state.R;
  if (state.n() == 1) return std::max(kappa, lo);
  const double hi = dmin / 6.0;
  if (lo > hi)
    throw solver_error("blob radius window empty: d_min = " + std::to_string(dmin) +
                       " < 24 R; particles nearly touching");
  const double d = kappa / std::sqrt(static_cast<double>(state.n()));
  return std::clamp(d, lo, hi);
}

namespace {

void check_drag_preconditions(const MicroState& state, double d, const DragOptions& opts) {
  if (!(opts.tol > 0.0)) throw validation_error("drag tol must be positive");
  if (opts.max_iter < 1) throw validation_error("drag max_iter must be at least 1");
  if (!(d > 0.0)) throw validation_error("blob radius must be positive");
  if (d < 4.0 * state.R) throw validation_error("drag solve: blob radius below 4R");
  if (state.n() >= 2) {
    const double dmin = min_distance(state.X);
    if (d > dmin / 6.0)
      throw validation_error("drag solve: blob radius exceeds d_min/6 (d_min = " +
                             std::to_string(dmin) + ")");
  }
}

std::pair<ForceSet, DragSolveReport> solve_drag_fixed_point(const MicroState& state, double d,
                                                            const DragOptions& opts,
                                                            ThreadPool& pool) {
  const int n = state.n();
  const double kappa = 1.0 / static_cast<double>(n);
  ForceSet fs;
  fs.scale = static_cast<double>(n);
  fs.F.resize(n);
  for (int i = 0; i < n; ++i) fs.F[i] = kappa * state.V[i];

  Vec3List u;
  Vec3List residual(n);
  double theta = 1.0;
  double prev_res = std::numeric_limits<double>::infinity();
  for (int it = 1; it <= opts.max_iter; ++it) {
    superpose(state.X, state.X, fs.F, d, /*exclude_self=*/true, u, pool);
    double res = 0.0;
    for (int i = 0; i < n; ++i) {
      residual[i] = fs.F[i] - kappa * (state.V[i] - u[i]);
      res = std::max(res, residual[i].norm());
    }
    if (res <= opts.tol) {
      return {std::move(fs), DragSolveReport{it, res, DragMethod::fixed_point}};
    }
    if (res > prev_res) theta *= 0.5;
    prev_res = res;
    for (int i = 0; i < n; ++i) fs.F[i] -= theta * residual[i];
  }
  throw solver_error("drag fixed point: no convergence after " + std::to_string(opts.max_iter) +
                         " iterations (last residual " + std::to_string(prev_res) + ")",
                     opts.max_iter, prev_res);
}

std::pair<ForceSet, DragSolveReport> solve_drag_dense(const MicroState& state, double d,
                                                      ThreadPool& pool) {
  const int n = state.n();
  if (n > 512) throw validation_error("dense drag solve limited to N <= 512");
  const double kappa = 1.0 / static_cast<double>(n);
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(3 * n, 3 * n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      a.block<3, 3>(3 * i, 3 * j) = kappa * oseen_blob(state.X[i] - state.X[j], d);
    }
  }
  Eigen::VectorXd rhs(3 * n);
  for (int i = 0; i < n; ++i) rhs.segment<3>(3 * i) = kappa * state.V[i];
  const Eigen::VectorXd sol = a.partialPivLu().solve(rhs);

  ForceSet fs;
  fs.scale = static_cast<double>(n);
  fs.F.resize(n);
  for (int i = 0; i < n; ++i) fs.F[i] = sol.segment<3>(3 * i);

  // Report the same fixed-point residual the iterative path reports, so the
  // two methods are directly comparable.
  Vec3List u;
  superpose(state.X, state.X, fs.F, d, /*exclude_self=*/true, u, pool);
  double res = 0.0;
  for (int i = 0; i < n; ++i) res = std::max(res, (fs.F[i] - kappa * (state.V[i] - u[i])).norm());
  return {std::move(fs), DragSolveReport{1, res, DragMethod::dense_direct}};
}

}  // namespace

std::pair<ForceSet, DragSolveReport> solve_drag(const MicroState& state, double d,
                                                const DragOptions& opts, ThreadPool& pool) {
  state.validate();
  check_drag_preconditions(state, d, opts);
  if (opts.method == DragMethod::dense_direct) return solve_drag_dense(state, d, pool);
  return solve_drag_fixed_point(state, d, opts, pool);
}

namespace {

struct Derivative {
  Vec3List dX;  // = V
  Vec3List dV;  // = g - N F
};

Derivative rhs(const MicroState& state, double d, const Vec3& g, const DragOptions& opts,
               ThreadPool& pool, StepReport* report) {
  auto [forces, rep] = solve_drag(state, d, opts, pool);
  if (report) {
    report->max_iterations = std::max(report->max_iterations, rep.iterations);
    report->max_residual = std::max(report->max_residual, rep.residual);
  }
  Derivative der;
  der.dX = state.V;
  der.dV.resize(state.n());
  const double n = forces.scale;
  for (int i = 0; i < state.n(); ++i) der.dV[i] = g - n * forces.F[i];
  return der;
}

MicroState advanced(const MicroState& base, const Derivative& der, double h) {
  MicroState out;
  out.R = base.R;
  out.t = base.t + h;
  const int n = base.n();
  out.X.resize(n);
  out.V.resize(n);
  for (int i = 0; i < n; ++i) {
    out.X[i] = base.X[i] + h * der.dX[i];
    out.V[i] = base.V[i] + h * der.dV[i];
  }
  return out;
}

}  // namespace

MicroState step(const MicroState& state, double dt, double d, const Vec3& g,
                const DragOptions& opts, ThreadPool& pool, StepReport* report) {
  if (!(dt > 0.0)) throw validation_error("step: dt must be positive");
  const Derivative k1 = rhs(state, d, g, opts, pool, report);
  const Derivative k2 = rhs(advanced(state, k1, 0.5 * dt), d, g, opts, pool, report);
  const Derivative k3 = rhs(advanced(state, k2, 0.5 * dt), d, g, opts, pool, report);
  const Derivative k4 = rhs(advanced(state, k3, dt), d, g, opts, pool, report);

  MicroState out;
  out.R = state.R;
  out.t = state.t + dt;
  const int n = state.n();
  out.X.resize(n);
  out.V.resize(n);
  const double w = dt / 6.0;
  for (int i = 0; i < n; ++i) {
    out.X[i] = state.X[i] + w * (k1.dX[i] + 2.0 * k2.dX[i] + 2.0 * k3.dX[i] + k4.dX[i]);
    out.V[i] = state.V[i] + w * (k1.dV[i] + 2.0 * k2.dV[i] + 2.0 * k3.dV[i] + k4.dV[i]);
  }

  if (n >= 2) {
    const double dmin = min_distance(out.X);
    if (dmin <= 2.0 * out.R) {
      throw solver_error("step: particle overlap at t = " + std::to_string(out.t) +
                         " (min pair distance " + std::to_string(dmin) + " <= 2R = " +
                         std::to_string(2.0 * out.R) + ")");
    }
  }
  return out;
}

}  // namespace stokesmf
