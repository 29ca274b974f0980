// Command-line front end: single-run drivers, the convergence study,
// ad-hoc transport distances, and diagnostics recomputation from saved
// state files.  Exit codes: 0 success, 1 bad input, 2 runtime failure.

#include <cmath>
#include <iostream>
#include <numbers>
#include <string>

#include <CLI11.hpp>

#include "stokesmf/config.hpp"
#include "stokesmf/errors.hpp"
#include "stokesmf/experiment.hpp"
#include "stokesmf/metrics.hpp"
#include "stokesmf/outputs.hpp"
#include "stokesmf/transport.hpp"
#include "stokesmf/version.hpp"

namespace {

using namespace stokesmf;

struct RunArgs {
  std::string config_path;
  std::string out_dir;
  std::string sweep;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int threads = -1;
};

void add_run_options(CLI::App* sub, RunArgs& args, bool with_sweep) {
  sub->add_option("--config", args.config_path, "experiment config file")->required();
  sub->add_option("--out", args.out_dir, "output directory (overrides config)");
  sub->add_option("--seed", args.seed, "master seed (overrides config)");
  sub->add_option("--threads", args.threads, "worker threads, 0 = hardware (overrides config)");
  if (with_sweep)
    sub->add_option("--sweep", args.sweep, "comma-separated N values (overrides config)");
}

ExperimentConfig load_config(const RunArgs& args, const CLI::App* sub) {
  ExperimentConfig cfg = parse_config(args.config_path);
  if (!args.out_dir.empty()) cfg.output_dir = args.out_dir;
  if (sub->count("--seed") > 0) cfg.seed = args.seed;
  if (args.threads >= 0) cfg.threads = args.threads;
  if (!args.sweep.empty()) cfg.sweep.n_values = parse_sweep_list(args.sweep);
  cfg.validate();
  return cfg;
}

void cmd_micro_run(const ExperimentConfig& cfg) {
  const MicroRunResult r = run_micro(cfg);
  std::cout << "micro-run: N=" << cfg.n << " t=" << format_double(r.final_state.t)
            << " samples=" << r.records.size() << " -> " << cfg.output_dir << "\n";
  if (cfg.n >= 2)
    std::cout << "dmin_ratio_min = " << format_double(r.dmin_ratio_min)
              << "  s2_ratio_max = " << format_double(r.s2_ratio_max)
              << "  buckling_ratio = " << format_double(r.buckling_ratio) << "\n";
  if (cfg.n == 1)
    std::cout << "relaxation_max_err = " << format_double(r.relaxation_max_err) << "\n";
}

void cmd_meso_run(const ExperimentConfig& cfg) {
  const MesoRunResult r = run_meso(cfg);
  std::cout << "meso-run: M=" << r.final_cloud.size()
            << " t=" << format_double(r.final_cloud.t) << " samples=" << r.records.size()
            << " -> " << cfg.output_dir << "\n";
  if (!cfg.fluid.coupling)
    std::cout << "relaxation_max_err = " << format_double(r.relaxation_max_err) << "\n";
  for (const std::string& w : r.warnings) std::cout << "warning: " << w << "\n";
}

void cmd_converge(const ExperimentConfig& cfg) {
  const ConvergeResult r = run_converge(cfg);
  for (const ConvergePerN& per : r.per_n)
    std::cout << "N=" << per.n << "  median w2_phase(T) = " << format_double(per.median_w2_final)
              << "  envelope a = " << format_double(per.envelope_a)
              << ", c = " << format_double(per.envelope_c) << "\n";
  std::cout << "slope = " << format_double(r.slope_fit.slope)
            << "  monotone = " << (r.w2_monotone ? "yes" : "no")
            << "  slope_ok = " << (r.slope_ok ? "yes" : "no")
            << "  envelope_ok = " << (r.envelope_ok ? "yes" : "no") << "\n";
  for (const std::string& f : r.failed_runs) std::cout << "failed: " << f << "\n";
  std::cout << "rows = " << r.rows.size() << " -> " << cfg.output_dir << "\n";
}

struct W2Args {
  std::string a_path;
  std::string b_path;
  bool space_only = false;
  std::string method = "exact";
  int cap = 2048;
  double epsilon_factor = 1e-3;
};

void cmd_w2(const W2Args& args) {
  const StateFile a = parse_state_csv(read_file(args.a_path));
  const StateFile b = parse_state_csv(read_file(args.b_path));
  TransportOptions opts;
  if (args.method == "exact")
    opts.method = TransportMethod::exact;
  else if (args.method == "entropic")
    opts.method = TransportMethod::entropic;
  else
    throw validation_error("w2: method must be exact or entropic");
  opts.cap = args.cap;
  opts.epsilon_factor = args.epsilon_factor;
  const WeightedCloud ca =
      args.space_only ? make_cloud(a.x, a.m) : make_phase_cloud(a.x, a.v, a.m);
  const WeightedCloud cb =
      args.space_only ? make_cloud(b.x, b.m) : make_phase_cloud(b.x, b.v, b.m);
  const TransportResult res = wasserstein2(ca, cb, opts);
  std::cout << "w2 = " << format_double(res.w2) << "\n"
            << "cost = " << format_double(res.cost) << "\n"
            << "method = " << res.method_label() << "\n"
            << "support = " << res.plan_support_size << "\n";
}

struct DiagArgs {
  std::string state_path;
  std::string config_path;
};

bool uniform_masses(const std::vector<double>& m) {
  const double ref = 1.0 / static_cast<double>(m.size());
  for (double v : m)
    if (std::abs(v - ref) > 1e-12 * ref) return false;
  return true;
}

// Uniform masses get the particle treatment (radius from the count
// coupling, drag solve); anything else is read as a weighted cloud.
void cmd_diag(const DiagArgs& args) {
  const StateFile s = parse_state_csv(read_file(args.state_path));
  if (s.x.empty()) throw validation_error("diag: state file holds no points");
  ExperimentConfig cfg;
  if (!args.config_path.empty()) cfg = parse_config(args.config_path);
  ThreadPool pool(cfg.threads);
  const int n = static_cast<int>(s.x.size());

  DiagnosticsRecord rec;
  if (uniform_masses(s.m)) {
    MicroState state;
    state.X = s.x;
    state.V = s.v;
    state.R = 1.0 / (6.0 * std::numbers::pi * n);
    const double dmin =
        n >= 2 ? min_distance(state.X) : std::numeric_limits<double>::infinity();
    const double d = blob_radius_for(state, cfg.blob_kappa, dmin);
    const auto [forces, report] = solve_drag(state, d, cfg.drag, pool);
    (void)report;
    rec = micro_diagnostics(state, forces);
  } else {
    LagrangianCloud cloud;
    cloud.Y = s.x;
    cloud.W = s.v;
    cloud.m = s.m;
    cloud.delta = cfg.delta_for(n);
    cloud.validate();
    const FluidField field = solve_fluid(cloud, cfg.fluid, pool);
    std::optional<double> lip;
    if (n >= 2) lip = lipschitz_monitor(cloud);
    rec = meso_diagnostics(cloud, field, lip);
  }
  std::cout << diagnostics_csv({rec}, n);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stokesmf: inertial particles in Stokes flow and their mean-field cloud"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  RunArgs micro_args, meso_args, converge_args;
  W2Args w2_args;
  DiagArgs diag_args;
  std::string reference_out;

  CLI::App* micro = app.add_subcommand("micro-run", "evolve the particle system");
  add_run_options(micro, micro_args, false);
  micro->callback([&] { cmd_micro_run(load_config(micro_args, micro)); });

  CLI::App* meso = app.add_subcommand("meso-run", "evolve the Lagrangian cloud");
  add_run_options(meso, meso_args, false);
  meso->callback([&] { cmd_meso_run(load_config(meso_args, meso)); });

  CLI::App* conv = app.add_subcommand("converge", "paired sweep with transport distances");
  add_run_options(conv, converge_args, true);
  conv->callback([&] { cmd_converge(load_config(converge_args, conv)); });

  CLI::App* w2 = app.add_subcommand("w2", "transport distance between two state files");
  w2->add_option("--a", w2_args.a_path, "first state file")->required();
  w2->add_option("--b", w2_args.b_path, "second state file")->required();
  w2->add_flag("--space", w2_args.space_only, "positions only (default: position-velocity)");
  w2->add_option("--method", w2_args.method, "exact | entropic");
  w2->add_option("--cap", w2_args.cap, "exact-method size limit");
  w2->add_option("--epsilon-factor", w2_args.epsilon_factor,
                 "entropic eps = factor * bbox diagonal^2");
  w2->callback([&] { cmd_w2(w2_args); });

  CLI::App* diag = app.add_subcommand("diag", "recompute diagnostics from a state file");
  diag->add_option("--state", diag_args.state_path, "state file")->required();
  diag->add_option("--config", diag_args.config_path, "config for solver settings (optional)");
  diag->callback([&] { cmd_diag(diag_args); });

  CLI::App* ref = app.add_subcommand("config-reference", "print the config key reference");
  ref->add_option("--out", reference_out, "write to a file instead of stdout");
  ref->callback([&] {
    if (reference_out.empty())
      std::cout << config_reference_markdown();
    else
      atomic_write_file(reference_out, config_reference_markdown());
  });

  try {
    app.parse(argc, argv);
    return 0;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const validation_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
