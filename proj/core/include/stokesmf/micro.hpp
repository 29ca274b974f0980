#pragma once

#include <cstdint>
#include <utility>

#include "stokesmf/initial_data.hpp"
#include "stokesmf/oseen.hpp"
#include "stokesmf/parallel.hpp"
#include "stokesmf/vec.hpp"

namespace stokesmf {

// Inertial particles settling in a Stokes fluid.  The particle radius is
// tied to the count by 6 pi R = 1/N, so the drag coefficient per particle
// is exactly 1/N and the velocity relaxation rate in
//   dX_i/dt = V_i,   dV_i/dt = g - N F_i
// is of order one.
struct MicroState {
  Vec3List X;
  Vec3List V;
  double R = 0.0;
  double t = 0.0;

  int n() const { return static_cast<int>(X.size()); }
  void validate() const;  // radius coupling N*R = 1/(6 pi), matching lengths
};

// Drag forces from a mobility solve; scale holds N so that the dynamically
// relevant N*F_i is recoverable without re-deriving it from state.
struct ForceSet {
  Vec3List F;
  double scale = 1.0;
};

enum class DragMethod { fixed_point, dense_direct };

struct DragOptions {
  double tol = 1e-12;
  int max_iter = 200;
  DragMethod method = DragMethod::fixed_point;
};

struct DragSolveReport {
  int iterations = 0;
  double residual = 0.0;
  DragMethod method = DragMethod::fixed_point;
};

// i.i.d. positions from rho0 with hard-core rejection at exclusion radius
// chi * N^(-1/2); velocities V_i = w0(X_i) exactly; R = 1/(6 pi N).  The
// returned state has d_min >= the exclusion radius by construction.  seed
// is a derived stream seed (see rng.hpp).
MicroState init_particles(const InitialDataSpec& spec, int n, std::uint64_t seed);

// Smallest particle count for which the exclusion radius chi * N^(-1/2)
// dominates 8R = 8/(6 pi N); above it sampled states have d_min >= 8R.
int hard_core_threshold(double chi);

// Blob radius for the current state: min(kappa * N^(-1/2), d_min/6),
// clamped from below by 4R.  Throws solver_error when the admissible
// window [4R, d_min/6] is empty (particles nearly touching).
double blob_radius_for(const MicroState& state, double kappa, double dmin);

// Solves F_i = (1/N) (V_i - sum_{j != i} oseen_blob(X_i - X_j, d) F_j).
//
// fixed_point: damped Jacobi F <- F - theta (F - (1/N)(V - M F)) starting
// from F = V/N with theta = 1, halved whenever the max-norm residual
// increases.  The reported residual is exactly max_i |F_i - (1/N)(V_i -
// (M F)_i)| for the returned F, so it can be re-evaluated independently.
//
// dense_direct: assembles the 3N x 3N resistance system (I + M/N) F = V/N
// and LU-solves it; limited to N <= 512.
//
// Preconditions: 4R <= d <= d_min/6 and tol > 0.
std::pair<ForceSet, DragSolveReport> solve_drag(const MicroState& state, double d,
                                                const DragOptions& opts, ThreadPool& pool);

struct StepReport {
  int max_iterations = 0;     // worst drag stage
  double max_residual = 0.0;  // worst accepted stage residual
};

// One classical RK4 step of (X, V) with the drag force re-solved at every
// stage (cold start each time, for run-to-run determinism).  Throws
// solver_error if any post-step pair distance drops to 2R or below.
MicroState step(const MicroState& state, double dt, double d, const Vec3& g,
                const DragOptions& opts, ThreadPool& pool, StepReport* report = nullptr);

}  // namespace stokesmf
