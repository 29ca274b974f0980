#pragma once

#include <cstdint>

#include "stokesmf/initial_data.hpp"
#include "stokesmf/micro.hpp"
#include "stokesmf/parallel.hpp"
#include "stokesmf/vec.hpp"

namespace stokesmf {

// Weighted Lagrangian characteristics (Y_k, W_k, m_k) discretizing a
// single-velocity phase density: all mass at Y_k moves with W_k.  The
// fluid velocity is recovered from the cloud itself through a blob
// regularized momentum exchange with mollification length delta.
struct LagrangianCloud {
  Vec3List Y;
  Vec3List W;
  std::vector<double> m;  // nonnegative, sums to 1
  double delta = 0.0;
  double t = 0.0;

  int size() const { return static_cast<int>(Y.size()); }
  void validate() const;  // matching lengths, mass normalization, delta > 0
};

struct FluidField {
  Vec3List u;  // fluid velocity at the cloud points
  double residual = 0.0;
  int iterations = 0;
};

struct FluidOptions {
  double tol = 1e-12;
  int max_iter = 200;
  bool coupling = true;  // false forces u = 0 (decoupled relaxation runs)
  bool dense_direct = false;  // direct solve of the 3M x 3M system, M <= 512
};

// i.i.d. cloud: Y_k ~ rho0 with the same sampler the particle module uses
// (but no hard core), m_k = 1/M, W_k = w0(Y_k).  seed is a derived stream
// seed (see rng.hpp).
LagrangianCloud init_cloud(const InitialDataSpec& spec, int m, std::uint64_t seed, double delta);

// Coupled cloud: Y_k = X_k, m_k = 1/N, W_k = V_k (the particle state's
// velocities are exactly w0(X_k) at t = 0, so the two phase clouds
// coincide and their transport distance starts at zero).
LagrangianCloud init_cloud_coupled(const MicroState& state, double delta);

// Solves u_k = sum_j oseen_blob(Y_k - Y_j, delta) m_j (W_j - u_j), self
// term included.  Damped fixed point from u = 0; damping 1, halved on
// residual increase.  The reported residual is re-evaluable from the
// returned u.  dense_direct assembles (I + K diag(m)) u = K diag(m) W.
FluidField solve_fluid(const LagrangianCloud& cloud, const FluidOptions& opts, ThreadPool& pool);

struct CloudStepReport {
  int max_iterations = 0;
  double max_residual = 0.0;
};

// RK4 step of (dY, dW) = (W, g + u(Y) - W) with the fluid re-solved at
// every stage; masses are carried unchanged.
LagrangianCloud step_cloud(const LagrangianCloud& cloud, double dt, const Vec3& g,
                           const FluidOptions& opts, ThreadPool& pool,
                           CloudStepReport* report = nullptr);

// max over each point's k nearest neighbors of |W_a - W_b| / |Y_a - Y_b|,
// a finite-difference proxy for the Lipschitz seminorm of the transported
// velocity field; blows up when characteristics approach crossing.
double lipschitz_monitor(const LagrangianCloud& cloud, int k_neighbors = 8);

}  // namespace stokesmf
