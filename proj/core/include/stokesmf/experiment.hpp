#pragma once

#include <string>
#include <utility>
#include <vector>

#include "stokesmf/config.hpp"
#include "stokesmf/meso.hpp"
#include "stokesmf/metrics.hpp"
#include "stokesmf/micro.hpp"
#include "stokesmf/outputs.hpp"

namespace stokesmf {

// Ordinary least squares of log(value) against log(n):
// value ~ exp(intercept) * n^slope.  residual is the RMS of the log-space
// misfit.  Requires at least two pairs, positive values, distinct n.
struct FitResult {
  double slope = 0.0;
  double intercept = 0.0;
  double residual = 0.0;
};

FitResult fit_rate(const std::vector<std::pair<double, double>>& pairs);

// Uniform step grid over [0, horizon]: full steps of dt, the final step
// shortened so the last node lands exactly on the horizon.
struct TimeGrid {
  double horizon = 0.0;
  double dt = 0.0;
  int n_steps = 0;

  static TimeGrid make(double horizon, double dt);
  double time_of(int k) const;    // node time, k in [0, n_steps]
  double step_size(int k) const;  // duration of step k, k in [0, n_steps)
  // k = 0, k = n_steps, and every interval-th step; interval 0 keeps only
  // the endpoints.
  bool is_sample(int k, int interval) const;
};

struct MicroRunResult {
  std::vector<DiagnosticsRecord> records;
  MicroState initial;
  MicroState final_state;
  // sum_i |V_i|^2 at t = 0 and after every step; drag dissipation makes
  // this non-increasing when g = 0.
  std::vector<double> step_energy;
  // max over step ends of |V(t) - g(1 - e^-t) - V_0 e^-t| for N = 1,
  // where the drag closes exactly; NaN otherwise.
  double relaxation_max_err = 0.0;
  double dmin_ratio_min = 1.0;   // min_t d_min(t)/d_min(0) over samples
  double s2_ratio_max = 1.0;     // max_t S_2(t)/S_2(0) over samples
  double buckling_ratio = 1.0;   // sup_t buckling(t) / buckling(0)
  std::vector<std::string> warnings;
};

// Evolves the particle system to the horizon and writes diagnostics.csv,
// summary.json, and (when snapshot.final is on) state_initial.csv and
// state_final.csv under cfg.output_dir.
MicroRunResult run_micro(const ExperimentConfig& cfg);

struct MesoRunResult {
  std::vector<DiagnosticsRecord> records;
  LagrangianCloud initial;
  LagrangianCloud final_cloud;
  // max over points and step ends of |W_k(t) - g(1 - e^-t) - W_k(0) e^-t|
  // when the fluid coupling is off (the cloud then relaxes pointwise);
  // NaN when coupling is on.
  double relaxation_max_err = 0.0;
  std::vector<std::string> warnings;
};

// Cloud analogue of run_micro.  M = coupled first samples the particle
// system of size N and copies its positions and velocities.
MesoRunResult run_meso(const ExperimentConfig& cfg);

struct ConvergePerN {
  int n = 0;
  double median_w2_final = 0.0;
  // per-N exponential fit median w2_phase(t) ~ a * e^(c t) over the
  // positive samples; 0/0 when fewer than two such samples exist.
  double envelope_a = 0.0;
  double envelope_c = 0.0;
};

struct ConvergeResult {
  std::vector<ConvergenceRow> rows;  // ordered by (N, run, t)
  std::vector<ConvergePerN> per_n;
  FitResult slope_fit;  // log-log fit of median w2_phase(T) against N
  bool w2_monotone = false;   // median w2_phase(T) strictly decreasing in N
  bool slope_ok = false;      // slope_fit.slope <= -0.2
  bool envelope_ok = false;   // smallest-N (a, c) dominates every larger N
  std::vector<std::string> failed_runs;
};

// Runs the paired particle/cloud evolution for every (N, run) of the
// sweep with coupled initialization, computing transport distances at the
// sample times.  Writes converge.csv and summary.json under
// cfg.output_dir.  Requires a non-empty sweep and M = coupled.  A run
// that fails mid-flight is dropped from the table and recorded in
// failed_runs instead of aborting the sweep.
ConvergeResult run_converge(const ExperimentConfig& cfg);

}  // namespace stokesmf
