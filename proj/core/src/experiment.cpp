#include "stokesmf/experiment.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <limits>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "stokesmf/errors.hpp"
#include "stokesmf/rng.hpp"
#include "stokesmf/transport.hpp"
#include "stokesmf/version.hpp"

namespace stokesmf {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct Line {
  double slope = 0.0;
  double intercept = 0.0;
  double rms = 0.0;
};

Line ols(const std::vector<double>& x, const std::vector<double>& y) {
  const auto n = static_cast<double>(x.size());
  double xbar = 0.0, ybar = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    xbar += x[i];
    ybar += y[i];
  }
  xbar /= n;
  ybar /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - xbar) * (x[i] - xbar);
    sxy += (x[i] - xbar) * (y[i] - ybar);
  }
  if (!(sxx > 0.0)) throw validation_error("fit: abscissae must be distinct");
  Line line;
  line.slope = sxy / sxx;
  line.intercept = ybar - line.slope * xbar;
  double ss = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - (line.intercept + line.slope * x[i]);
    ss += r * r;
  }
  line.rms = std::sqrt(ss / n);
  return line;
}

double kinetic(const Vec3List& v) {
  double e = 0.0;
  for (const Vec3& w : v) e += w.squaredNorm();
  return e;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Acceptance flags emitted into every summary.json, in a fixed order.
// Properties a run type cannot observe stay "not_evaluated".
constexpr std::array<const char*, 12> kAcceptanceKeys = {
    "single_particle_relaxation", "decoupled_cloud_relaxation", "min_distance_preservation",
    "s2_control",                 "buckling_bound",             "w2_convergence",
    "drag_solver_oracle",         "fluid_solver_oracle",        "transport_exactness",
    "kernel_accuracy",            "energy_dissipation",         "thread_determinism"};

const char* flag(bool ok) { return ok ? "pass" : "fail"; }

// The echo reproduces the canonical serialization key for key, minus the
// two execution-only keys, so byte-identical summaries across thread
// counts come for free.
ordered_json config_echo(const ExperimentConfig& cfg) {
  ordered_json out = ordered_json::object();
  std::istringstream in(serialize_config(cfg));
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find(" = ");
    const std::string key = line.substr(0, eq);
    if (key == "threads" || key == "output_dir") continue;
    out[key] = line.substr(eq + 3);
  }
  return out;
}

ordered_json summary_skeleton(const ExperimentConfig& cfg, const char* run_type) {
  ordered_json j;
  j["version"] = kVersion;
  j["run_type"] = run_type;
  j["config"] = config_echo(cfg);
  j["results"] = ordered_json::object();
  j["fits"] = ordered_json::object();
  ordered_json acc = ordered_json::object();
  for (const char* key : kAcceptanceKeys) acc[key] = "not_evaluated";
  j["acceptance"] = acc;
  j["warnings"] = ordered_json::array();
  j["failed_runs"] = ordered_json::array();
  return j;
}

void write_output(const std::string& dir, const char* name, const std::string& content) {
  atomic_write_file((std::filesystem::path(dir) / name).string(), content);
}

}  // namespace

FitResult fit_rate(const std::vector<std::pair<double, double>>& pairs) {
  if (pairs.size() < 2) throw validation_error("fit_rate: need at least two pairs");
  std::vector<double> x, y;
  x.reserve(pairs.size());
  y.reserve(pairs.size());
  for (const auto& [n, value] : pairs) {
    if (!(n > 0.0) || !(value > 0.0))
      throw validation_error("fit_rate: pairs must be strictly positive");
    x.push_back(std::log(n));
    y.push_back(std::log(value));
  }
  const Line line = ols(x, y);
  return {line.slope, line.intercept, line.rms};
}

TimeGrid TimeGrid::make(double horizon, double dt) {
  if (!(dt > 0.0)) throw validation_error("time grid: dt must be positive");
  if (!(horizon >= 0.0)) throw validation_error("time grid: horizon must be nonnegative");
  TimeGrid grid;
  grid.horizon = horizon;
  grid.dt = dt;
  if (horizon == 0.0) return grid;
  int n = static_cast<int>(std::ceil(horizon / dt - 1e-9));
  if (n < 1) n = 1;
  while (n > 1 && (n - 1) * dt >= horizon) --n;
  grid.n_steps = n;
  return grid;
}

double TimeGrid::time_of(int k) const { return k >= n_steps ? horizon : k * dt; }

double TimeGrid::step_size(int k) const { return time_of(k + 1) - time_of(k); }

bool TimeGrid::is_sample(int k, int interval) const {
  if (k == 0 || k == n_steps) return true;
  return interval > 0 && k % interval == 0;
}

MicroRunResult run_micro(const ExperimentConfig& cfg) {
  cfg.validate();
  ThreadPool pool(cfg.threads);
  const std::uint64_t stream = derive_seed(cfg.seed, StreamPurpose::micro_init,
                                           static_cast<std::uint64_t>(cfg.n), 0);
  MicroRunResult out;
  MicroState state = init_particles(cfg.initial, cfg.n, stream);
  out.initial = state;

  const TimeGrid grid = TimeGrid::make(cfg.horizon, cfg.dt);
  const Vec3 g = cfg.initial.g;
  const bool multi = cfg.n >= 2;
  const Vec3 v0 = state.V[0];

  double buckling_sup = 0.0;
  const auto sample = [&](double dmin) {
    const double d = blob_radius_for(state, cfg.blob_kappa, dmin);
    const auto [forces, report] = solve_drag(state, d, cfg.drag, pool);
    (void)report;
    const DiagnosticsRecord rec = micro_diagnostics(state, forces);
    out.records.push_back(rec);
    buckling_sup = std::max(buckling_sup, rec.buckling);
    return rec;
  };

  const DiagnosticsRecord rec0 = sample(multi ? min_distance(state.X) : kInf);
  out.step_energy.push_back(kinetic(state.V));
  double relax_err = 0.0;

  for (int k = 0; k < grid.n_steps; ++k) {
    const double dmin = multi ? min_distance(state.X) : kInf;
    const double d = blob_radius_for(state, cfg.blob_kappa, dmin);
    try {
      state = step(state, grid.step_size(k), d, g, cfg.drag, pool);
    } catch (const solver_error& e) {
      throw solver_error("step " + std::to_string(k) + ": " + e.what(), e.iterations,
                         e.last_residual);
    }
    state.t = grid.time_of(k + 1);
    out.step_energy.push_back(kinetic(state.V));
    if (cfg.n == 1) {
      const double decay = std::exp(-state.t);
      const Vec3 closed = g * (1.0 - decay) + v0 * decay;
      relax_err = std::max(relax_err, (state.V[0] - closed).norm());
    }
    if (grid.is_sample(k + 1, cfg.diag_interval)) {
      const DiagnosticsRecord sampled = sample(multi ? min_distance(state.X) : kInf);
      if (multi) {
        out.dmin_ratio_min = std::min(out.dmin_ratio_min, sampled.d_min / rec0.d_min);
        out.s2_ratio_max = std::max(out.s2_ratio_max, sampled.s2_over_n / rec0.s2_over_n);
      }
    }
  }
  out.final_state = state;
  out.relaxation_max_err = cfg.n == 1 ? relax_err : kNaN;
  out.buckling_ratio = multi ? buckling_sup / rec0.buckling : 1.0;

  double energy_rise = 0.0;
  for (std::size_t k = 0; k + 1 < out.step_energy.size(); ++k) {
    const double base = out.step_energy[k] > 0.0 ? out.step_energy[k] : 1.0;
    energy_rise = std::max(energy_rise, (out.step_energy[k + 1] - out.step_energy[k]) / base);
  }
  const bool g_zero = g.squaredNorm() == 0.0;

  write_output(cfg.output_dir, "diagnostics.csv", diagnostics_csv(out.records, cfg.n));
  if (cfg.snapshot_final) {
    const std::vector<double> masses(static_cast<std::size_t>(cfg.n), 1.0 / cfg.n);
    write_output(cfg.output_dir, "state_initial.csv",
                 state_csv(out.initial.X, out.initial.V, masses));
    write_output(cfg.output_dir, "state_final.csv", state_csv(state.X, state.V, masses));
  }

  ordered_json summary = summary_skeleton(cfg, "micro");
  ordered_json& res = summary["results"];
  res["n"] = cfg.n;
  res["steps"] = grid.n_steps;
  res["t_final"] = state.t;
  res["d_min_initial"] = rec0.d_min;
  res["d_min_final"] = out.records.back().d_min;
  res["dmin_ratio_min"] = multi ? ordered_json(out.dmin_ratio_min) : ordered_json(nullptr);
  res["s2_ratio_max"] = multi ? ordered_json(out.s2_ratio_max) : ordered_json(nullptr);
  res["buckling_ratio"] = multi ? ordered_json(out.buckling_ratio) : ordered_json(nullptr);
  res["relaxation_max_err"] =
      cfg.n == 1 ? ordered_json(out.relaxation_max_err) : ordered_json(nullptr);
  res["energy_max_rel_increase"] = energy_rise;
  ordered_json& acc = summary["acceptance"];
  if (cfg.n == 1) acc["single_particle_relaxation"] = flag(relax_err <= 1e-6);
  if (multi) {
    acc["min_distance_preservation"] = flag(out.dmin_ratio_min >= 0.5);
    acc["s2_control"] = flag(out.s2_ratio_max <= 4.0);
    acc["buckling_bound"] = flag(out.buckling_ratio <= 8.0);
  }
  if (g_zero && grid.n_steps >= 1) acc["energy_dissipation"] = flag(energy_rise <= 1e-8);
  for (const std::string& w : out.warnings) summary["warnings"].push_back(w);
  write_output(cfg.output_dir, "summary.json", summary.dump(2) + "\n");
  return out;
}

MesoRunResult run_meso(const ExperimentConfig& cfg) {
  cfg.validate();
  ThreadPool pool(cfg.threads);
  MesoRunResult out;
  LagrangianCloud cloud;
  if (cfg.m) {
    const std::uint64_t stream = derive_seed(cfg.seed, StreamPurpose::meso_init,
                                             static_cast<std::uint64_t>(*cfg.m), 0);
    cloud = init_cloud(cfg.initial, *cfg.m, stream, cfg.delta_for(*cfg.m));
  } else {
    const std::uint64_t stream = derive_seed(cfg.seed, StreamPurpose::micro_init,
                                             static_cast<std::uint64_t>(cfg.n), 0);
    const MicroState seed_state = init_particles(cfg.initial, cfg.n, stream);
    cloud = init_cloud_coupled(seed_state, cfg.delta_for(cfg.n));
  }
  out.initial = cloud;

  const TimeGrid grid = TimeGrid::make(cfg.horizon, cfg.dt);
  const Vec3 g = cfg.initial.g;
  const int msize = cloud.size();
  const bool decoupled = !cfg.fluid.coupling;
  const Vec3List w0_snapshot = cloud.W;
  double relax_err = 0.0;

  const auto sample = [&]() {
    const FluidField field = solve_fluid(cloud, cfg.fluid, pool);
    std::optional<double> lip;
    if (msize >= 2) {
      lip = lipschitz_monitor(cloud);
      if (cfg.lipschitz_warn > 0.0 && *lip > cfg.lipschitz_warn)
        out.warnings.push_back("t=" + format_double(cloud.t) + ": velocity Lipschitz proxy " +
                               format_double(*lip) + " exceeds " +
                               format_double(cfg.lipschitz_warn));
    }
    out.records.push_back(meso_diagnostics(cloud, field, lip));
  };

  sample();
  for (int k = 0; k < grid.n_steps; ++k) {
    try {
      cloud = step_cloud(cloud, grid.step_size(k), g, cfg.fluid, pool);
    } catch (const solver_error& e) {
      throw solver_error("step " + std::to_string(k) + ": " + e.what(), e.iterations,
                         e.last_residual);
    }
    cloud.t = grid.time_of(k + 1);
    if (decoupled) {
      const double decay = std::exp(-cloud.t);
      for (int i = 0; i < msize; ++i) {
        const Vec3 closed = g * (1.0 - decay) + w0_snapshot[i] * decay;
        relax_err = std::max(relax_err, (cloud.W[i] - closed).norm());
      }
    }
    if (grid.is_sample(k + 1, cfg.diag_interval)) sample();
  }
  out.final_cloud = cloud;
  out.relaxation_max_err = decoupled ? relax_err : kNaN;

  write_output(cfg.output_dir, "diagnostics.csv", diagnostics_csv(out.records, msize));
  if (cfg.snapshot_final) {
    write_output(cfg.output_dir, "state_initial.csv",
                 state_csv(out.initial.Y, out.initial.W, out.initial.m));
    write_output(cfg.output_dir, "state_final.csv", state_csv(cloud.Y, cloud.W, cloud.m));
  }

  ordered_json summary = summary_skeleton(cfg, "meso");
  ordered_json& res = summary["results"];
  res["m"] = msize;
  res["coupled"] = !cfg.m.has_value();
  res["steps"] = grid.n_steps;
  res["t_final"] = cloud.t;
  res["delta"] = cloud.delta;
  res["relaxation_max_err"] = decoupled ? ordered_json(relax_err) : ordered_json(nullptr);
  if (decoupled)
    summary["acceptance"]["decoupled_cloud_relaxation"] = flag(relax_err <= 1e-6);
  for (const std::string& w : out.warnings) summary["warnings"].push_back(w);
  write_output(cfg.output_dir, "summary.json", summary.dump(2) + "\n");
  return out;
}

namespace {

std::vector<ConvergenceRow> run_converge_entry(const ExperimentConfig& cfg, int n_value,
                                               int run_index, ThreadPool& pool) {
  const std::uint64_t stream = derive_seed(cfg.seed, StreamPurpose::micro_init,
                                           static_cast<std::uint64_t>(n_value),
                                           static_cast<std::uint64_t>(run_index));
  MicroState state = init_particles(cfg.initial, n_value, stream);
  LagrangianCloud cloud = init_cloud_coupled(state, cfg.delta_for(n_value));
  const TimeGrid grid = TimeGrid::make(cfg.horizon, cfg.dt);
  const Vec3 g = cfg.initial.g;

  const double dmin0 = min_distance(state.X);
  const double s2_0 = s_beta(state.X, 2.0);
  double buckling_sup = 0.0;

  std::vector<ConvergenceRow> rows;
  const auto sample = [&](int k) {
    const double dmin = min_distance(state.X);
    const double d = blob_radius_for(state, cfg.blob_kappa, dmin);
    const auto [forces, report] = solve_drag(state, d, cfg.drag, pool);
    (void)report;
    buckling_sup = std::max(buckling_sup, buckling(state, forces));
    ConvergenceRow row;
    row.n = n_value;
    row.seed = run_index;
    row.t = grid.time_of(k);
    row.w2_phase = phase_distance(state, cloud, cfg.w2).w2;
    row.w2_space = space_distance(state, cloud, cfg.w2).w2;
    row.dmin_ratio = dmin / dmin0;
    row.s2_ratio = s_beta(state.X, 2.0) / s2_0;
    row.buckling_max = buckling_sup;
    rows.push_back(row);
  };

  sample(0);
  for (int k = 0; k < grid.n_steps; ++k) {
    const double h = grid.step_size(k);
    const double dmin = min_distance(state.X);
    const double d = blob_radius_for(state, cfg.blob_kappa, dmin);
    state = step(state, h, d, g, cfg.drag, pool);
    cloud = step_cloud(cloud, h, g, cfg.fluid, pool);
    state.t = grid.time_of(k + 1);
    cloud.t = state.t;
    if (grid.is_sample(k + 1, cfg.diag_interval)) sample(k + 1);
  }
  return rows;
}

}  // namespace

ConvergeResult run_converge(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.sweep.n_values.empty())
    throw validation_error("converge requires a non-empty sweep");
  if (cfg.m)
    throw validation_error("converge requires M = coupled (the clouds must coincide at t = 0)");

  struct Entry {
    int n;
    int run;
  };
  std::vector<Entry> entries;
  for (int n : cfg.sweep.n_values)
    for (int r = 0; r < cfg.sweep.seeds_per_n; ++r) entries.push_back({n, r});

  struct Outcome {
    std::vector<ConvergenceRow> rows;
    std::string error;
  };
  std::vector<Outcome> outcomes(entries.size());

  int requested = cfg.threads > 0 ? cfg.threads
                                  : static_cast<int>(std::thread::hardware_concurrency());
  if (requested < 1) requested = 1;
  const int workers = std::min(requested, static_cast<int>(entries.size()));
  const int inner_threads = std::max(1, requested / workers);

  std::atomic<std::size_t> next{0};
  const auto work = [&]() {
    ThreadPool pool(inner_threads);
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= entries.size()) return;
      const auto start = std::chrono::steady_clock::now();
      try {
        outcomes[i].rows = run_converge_entry(cfg, entries[i].n, entries[i].run, pool);
      } catch (const std::exception& e) {
        outcomes[i].rows.clear();
        outcomes[i].error = "N=" + std::to_string(entries[i].n) +
                            " run=" + std::to_string(entries[i].run) + ": " + e.what();
      }
      const double elapsed = std::chrono::duration<double>(
          std::chrono::steady_clock::now() - start).count();
      for (ConvergenceRow& row : outcomes[i].rows) row.wallclock = elapsed;
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> crew;
    crew.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) crew.emplace_back(work);
    for (std::thread& t : crew) t.join();
  }

  ConvergeResult out;
  for (const Outcome& o : outcomes) {
    if (!o.error.empty()) out.failed_runs.push_back(o.error);
    out.rows.insert(out.rows.end(), o.rows.begin(), o.rows.end());
  }

  // Median curves per N over the surviving runs.
  struct Curve {
    int n = 0;
    std::vector<double> t;
    std::vector<double> med;  // median w2_phase per sample index
    double buckling_ratio = 0.0;
  };
  std::vector<Curve> curves;
  double dmin_ratio_min = kInf, s2_ratio_max = 0.0, buckling_ratio_max = 0.0;
  bool any_rows = false;
  for (int n : cfg.sweep.n_values) {
    std::vector<const std::vector<ConvergenceRow>*> runs;
    for (std::size_t i = 0; i < entries.size(); ++i)
      if (entries[i].n == n && !outcomes[i].rows.empty()) runs.push_back(&outcomes[i].rows);
    if (runs.empty()) continue;
    Curve curve;
    curve.n = n;
    const std::size_t samples = runs.front()->size();
    for (std::size_t s = 0; s < samples; ++s) {
      std::vector<double> vals;
      for (const auto* rows : runs) vals.push_back((*rows)[s].w2_phase);
      curve.t.push_back((*runs.front())[s].t);
      curve.med.push_back(median(std::move(vals)));
    }
    for (const auto* rows : runs) {
      any_rows = true;
      for (const ConvergenceRow& row : *rows) {
        dmin_ratio_min = std::min(dmin_ratio_min, row.dmin_ratio);
        s2_ratio_max = std::max(s2_ratio_max, row.s2_ratio);
      }
      curve.buckling_ratio = std::max(
          curve.buckling_ratio, rows->back().buckling_max / rows->front().buckling_max);
    }
    buckling_ratio_max = std::max(buckling_ratio_max, curve.buckling_ratio);
    curves.push_back(std::move(curve));
  }

  for (const Curve& curve : curves) {
    ConvergePerN per;
    per.n = curve.n;
    per.median_w2_final = curve.med.back();
    std::vector<double> tx, ly;
    for (std::size_t s = 0; s < curve.t.size(); ++s)
      if (curve.med[s] > 0.0) {
        tx.push_back(curve.t[s]);
        ly.push_back(std::log(curve.med[s]));
      }
    if (tx.size() >= 2) {
      const Line line = ols(tx, ly);
      per.envelope_a = std::exp(line.intercept);
      per.envelope_c = line.slope;
    }
    out.per_n.push_back(per);
  }

  // Headline fits: log-log slope of the final-time medians, and the
  // smallest-N exponential envelope checked against every larger N.
  bool fits_evaluated = false;
  if (out.per_n.size() >= 2) {
    std::vector<std::pair<double, double>> pairs;
    bool positive = true;
    for (const ConvergePerN& per : out.per_n) {
      if (!(per.median_w2_final > 0.0)) positive = false;
      pairs.emplace_back(static_cast<double>(per.n), per.median_w2_final);
    }
    if (positive && out.per_n.front().envelope_a > 0.0) {
      out.slope_fit = fit_rate(pairs);
      out.w2_monotone = true;
      for (std::size_t i = 0; i + 1 < out.per_n.size(); ++i)
        if (!(out.per_n[i + 1].median_w2_final < out.per_n[i].median_w2_final))
          out.w2_monotone = false;
      out.slope_ok = out.slope_fit.slope <= -0.2;
      const double a = out.per_n.front().envelope_a;
      const double c = out.per_n.front().envelope_c;
      out.envelope_ok = true;
      for (std::size_t i = 1; i < curves.size(); ++i)
        for (std::size_t s = 0; s < curves[i].t.size(); ++s)
          if (curves[i].med[s] > a * std::exp(c * curves[i].t[s]) + 1e-12)
            out.envelope_ok = false;
      fits_evaluated = true;
    }
  }

  write_output(cfg.output_dir, "converge.csv", convergence_csv(out.rows));

  ordered_json summary = summary_skeleton(cfg, "converge");
  ordered_json& res = summary["results"];
  res["entries"] = entries.size();
  res["failed"] = out.failed_runs.size();
  res["dmin_ratio_min"] = any_rows ? ordered_json(dmin_ratio_min) : ordered_json(nullptr);
  res["s2_ratio_max"] = any_rows ? ordered_json(s2_ratio_max) : ordered_json(nullptr);
  res["buckling_ratio_max"] = any_rows ? ordered_json(buckling_ratio_max) : ordered_json(nullptr);
  res["w2_monotone"] = out.w2_monotone;
  res["slope_ok"] = out.slope_ok;
  res["envelope_ok"] = out.envelope_ok;
  ordered_json& fits = summary["fits"];
  fits["slope"] = fits_evaluated ? ordered_json(out.slope_fit.slope) : ordered_json(nullptr);
  fits["intercept"] =
      fits_evaluated ? ordered_json(out.slope_fit.intercept) : ordered_json(nullptr);
  fits["residual"] =
      fits_evaluated ? ordered_json(out.slope_fit.residual) : ordered_json(nullptr);
  ordered_json per_n = ordered_json::array();
  for (const ConvergePerN& per : out.per_n) {
    ordered_json j;
    j["n"] = per.n;
    j["median_w2_final"] = per.median_w2_final;
    j["a"] = per.envelope_a;
    j["c"] = per.envelope_c;
    per_n.push_back(j);
  }
  fits["per_n"] = per_n;
  ordered_json& acc = summary["acceptance"];
  if (any_rows) {
    acc["min_distance_preservation"] = flag(dmin_ratio_min >= 0.5);
    acc["s2_control"] = flag(s2_ratio_max <= 4.0);
    acc["buckling_bound"] = flag(buckling_ratio_max <= 8.0);
  }
  if (!out.failed_runs.empty())
    acc["w2_convergence"] = "fail";
  else if (fits_evaluated)
    acc["w2_convergence"] = flag(out.w2_monotone && out.slope_ok && out.envelope_ok);
  for (const std::string& f : out.failed_runs) summary["failed_runs"].push_back(f);
  write_output(cfg.output_dir, "summary.json", summary.dump(2) + "\n");
  return out;
}

}  // namespace stokesmf
