#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <limits>
#include <sstream>

#include "json.hpp"
#include "stokesmf/config.hpp"
#include "stokesmf/errors.hpp"
#include "stokesmf/experiment.hpp"
#include "stokesmf/outputs.hpp"
#include "stokesmf/version.hpp"
#include "support/oracles.hpp"

using namespace stokesmf;

namespace {

std::filesystem::path fresh_dir(const std::string& name) {
  const auto dir = std::filesystem::path("tmp_test_harness") / name;
  std::filesystem::remove_all(dir);
  return dir;
}

ExperimentConfig tiny_converge_config(const std::string& dir_name) {
  ExperimentConfig cfg;
  cfg.sweep.n_values = {16};
  cfg.sweep.seeds_per_n = 3;
  cfg.horizon = 0.02;
  cfg.dt = 0.01;
  cfg.diag_interval = 1;
  cfg.seed = 7;
  cfg.output_dir = fresh_dir(dir_name).string();
  return cfg;
}

// converge.csv with the wallclock column blanked, for determinism
// comparisons (wall time is the one legitimately non-reproducible field).
std::string mask_wallclock(const std::string& csv) {
  std::istringstream in(csv);
  std::string line, out;
  bool first = true;
  while (std::getline(in, line)) {
    if (!first) {
      const auto pos = line.rfind(',');
      if (pos != std::string::npos) line.resize(pos + 1);
    }
    first = false;
    out += line;
    out += '\n';
  }
  return out;
}

}  // namespace

TEST_CASE("minimal config text fills every documented default") {
  const ExperimentConfig cfg = parse_config_text("N = 8\nT = 0.1\n", "inline");
  CHECK(cfg.n == 8);
  CHECK(cfg.horizon == 0.1);
  CHECK(cfg.dt == 0.01);
  CHECK(cfg.seed == 0);
  CHECK_FALSE(cfg.m.has_value());
  CHECK(cfg.blob_kappa == 0.02);
  CHECK(cfg.drag.tol == 1e-12);
  CHECK(cfg.initial.chi == 0.2);
  CHECK(cfg.initial.rho0 == Rho0Kind::uniform_ball);
  CHECK(cfg.w2.cap == 2048);
  CHECK(cfg.sweep.n_values.empty());
}

TEST_CASE("unknown keys are hard errors that cite the key and line") {
  try {
    parse_config_text("N = 8\nftl_drive = on\n", "warp.cfg");
    FAIL("expected validation_error");
  } catch (const validation_error& e) {
    const std::string what = e.what();
    CHECK(what.find("ftl_drive") != std::string::npos);
    CHECK(what.find("warp.cfg:2") != std::string::npos);
  }
}

TEST_CASE("config parser rejects duplicates, bad types, and bad values") {
  CHECK_THROWS_AS(parse_config_text("N = 8\nN = 9\n", "x"), validation_error);
  CHECK_THROWS_AS(parse_config_text("N = banana\n", "x"), validation_error);
  CHECK_THROWS_AS(parse_config_text("dt = -0.5\n", "x"), validation_error);
  CHECK_THROWS_AS(parse_config_text("sweep = 512,256\n", "x"), validation_error);
  CHECK_THROWS_AS(parse_config_text("initial.rho0 = dodecahedron\n", "x"), validation_error);
  CHECK_THROWS_AS(parse_config_text("meso.coupling = maybe\n", "x"), validation_error);
}

TEST_CASE("serialized config is a parse fixed point") {
  const std::string text =
      "N = 48\nM = 32\nT = 0.25\ndt = 0.005\nseed = 123456789\n"
      "initial.rho0 = gaussian\ninitial.rho0.sigma = 0.5\n"
      "initial.w0 = rotation\ninitial.w0.omega = 0.1 -0.2 0.3\n"
      "initial.g = 0 0 -2\nsweep = 64,128,256\nsweep.seeds_per_n = 5\n"
      "w2.method = entropic\nw2.epsilon_factor = 0.002\ndrag.method = dense_direct\n";
  const ExperimentConfig cfg = parse_config_text(text, "inline");
  const std::string canonical = serialize_config(cfg);
  const ExperimentConfig reparsed = parse_config_text(canonical, "canonical");
  CHECK(serialize_config(reparsed) == canonical);
  CHECK(reparsed.m == cfg.m);
  CHECK(reparsed.initial.sigma == cfg.initial.sigma);
  CHECK((reparsed.initial.omega - cfg.initial.omega).norm() == 0.0);
  CHECK(reparsed.sweep.n_values == cfg.sweep.n_values);
  CHECK(reparsed.w2.method == TransportMethod::entropic);
  CHECK(reparsed.drag.method == DragMethod::dense_direct);
}

TEST_CASE("sweep lists parse strictly") {
  CHECK(parse_sweep_list("256,512,1024") == std::vector<int>({256, 512, 1024}));
  CHECK(parse_sweep_list(" 16 , 32 ") == std::vector<int>({16, 32}));
  CHECK_THROWS_AS(parse_sweep_list("16,eight"), validation_error);
  CHECK_THROWS_AS(parse_sweep_list("16,,32"), validation_error);

  // Monotonicity is a config invariant, not a lexer concern: the list
  // survives lexing and validate() rejects it.
  ExperimentConfig cfg;
  cfg.sweep.n_values = parse_sweep_list("16,16");
  CHECK(cfg.sweep.n_values == std::vector<int>({16, 16}));
  CHECK_THROWS_AS(cfg.validate(), validation_error);
  CHECK(parse_sweep_list("").empty());
}

TEST_CASE("generated reference page documents every config key") {
  const std::string page = config_reference_markdown();
  for (const char* key :
       {"N", "M", "T", "dt", "seed", "threads", "output_dir", "diag_interval",
        "initial.rho0", "initial.w0", "initial.chi", "blob.kappa", "drag.tol",
        "fluid.max_iter", "meso.delta_factor", "meso.lipschitz_warn", "w2.method",
        "w2.cap", "sweep", "snapshot.final"}) {
    CAPTURE(key);
    CHECK(page.find("| `" + std::string(key) + "` |") != std::string::npos);
  }
}

TEST_CASE("double formatting round-trips exactly") {
  auto rng = oracles::test_rng(700);
  for (int i = 0; i < 200; ++i) {
    const double v = std::ldexp(rng.uniform(-1.0, 1.0), static_cast<int>(rng.next_u64() % 80) - 40);
    CHECK(parse_double(format_double(v)) == v);
  }
  CHECK(parse_double(format_double(0.0)) == 0.0);
  const double inf = std::numeric_limits<double>::infinity();
  CHECK(parse_double(format_double(inf)) == inf);
  CHECK(parse_double(format_double(-inf)) == -inf);
  CHECK(format_double(0.1) == "0.1");
}

TEST_CASE("atomic file write round-trips and read errors carry the path") {
  const auto dir = fresh_dir("io");
  const std::string path = (dir / "nested" / "file.txt").string();
  atomic_write_file(path, "payload\n");
  CHECK(read_file(path) == "payload\n");
  CHECK_FALSE(std::filesystem::exists(path + ".tmp"));
  CHECK_THROWS_AS(read_file((dir / "missing.txt").string()), io_error);
}

TEST_CASE("empty row sets produce header-only CSV files") {
  CHECK(diagnostics_csv({}, 4) == std::string(kDiagnosticsHeader) + "\n");
  CHECK(convergence_csv({}) == std::string(kConvergenceHeader) + "\n");
  CHECK(parse_diagnostics_csv(diagnostics_csv({}, 4), 4).empty());
  CHECK(parse_convergence_csv(convergence_csv({})).empty());
}

TEST_CASE("diagnostics CSV reparses to bit-identical records") {
  auto rng = oracles::test_rng(701);
  std::vector<DiagnosticsRecord> records;
  for (int i = 0; i < 10; ++i) {
    DiagnosticsRecord r;
    r.t = 0.01 * i;
    r.d_min = rng.uniform01();
    r.s2_over_n = rng.uniform(0.0, 30.0);
    r.s4 = rng.uniform(0.0, 1e4);
    r.s6 = rng.uniform(0.0, 1e6);
    r.v_inf = rng.uniform01();
    r.v2 = rng.uniform(0.0, 10.0);
    r.nf_inf = rng.uniform01();
    r.buckling = r.nf_inf + r.v_inf + r.s2_over_n;
    if (i % 2 == 0) r.lipschitz_proxy = rng.uniform(0.0, 5.0);
    records.push_back(r);
  }
  const int n = 37;
  const auto parsed = parse_diagnostics_csv(diagnostics_csv(records, n), n);
  REQUIRE(parsed.size() == records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    CHECK(parsed[i].t == records[i].t);
    CHECK(parsed[i].d_min == records[i].d_min);
    CHECK(parsed[i].s2_over_n == records[i].s2_over_n);
    CHECK(parsed[i].v_inf == records[i].v_inf);
    CHECK(parsed[i].v2 == records[i].v2);
    CHECK(parsed[i].nf_inf == records[i].nf_inf);
    CHECK(parsed[i].buckling == records[i].buckling);
    CHECK(parsed[i].lipschitz_proxy.has_value() == records[i].lipschitz_proxy.has_value());
    if (parsed[i].lipschitz_proxy)
      CHECK(*parsed[i].lipschitz_proxy == *records[i].lipschitz_proxy);
  }
  CHECK_THROWS_AS(parse_diagnostics_csv("not,a,header\n", 4), io_error);
}

TEST_CASE("convergence CSV reparses to bit-identical rows") {
  auto rng = oracles::test_rng(702);
  std::vector<ConvergenceRow> rows;
  for (int i = 0; i < 8; ++i) {
    ConvergenceRow r;
    r.n = 256 << (i % 3);
    r.seed = i;
    r.t = 0.05 * i;
    r.w2_phase = rng.uniform01();
    r.w2_space = rng.uniform01();
    r.dmin_ratio = rng.uniform(0.5, 1.5);
    r.s2_ratio = rng.uniform(0.5, 4.0);
    r.buckling_max = rng.uniform(0.0, 10.0);
    r.wallclock = rng.uniform(0.0, 100.0);
    rows.push_back(r);
  }
  const auto parsed = parse_convergence_csv(convergence_csv(rows));
  REQUIRE(parsed.size() == rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(parsed[i].n == rows[i].n);
    CHECK(parsed[i].seed == rows[i].seed);
    CHECK(parsed[i].t == rows[i].t);
    CHECK(parsed[i].w2_phase == rows[i].w2_phase);
    CHECK(parsed[i].w2_space == rows[i].w2_space);
    CHECK(parsed[i].dmin_ratio == rows[i].dmin_ratio);
    CHECK(parsed[i].s2_ratio == rows[i].s2_ratio);
    CHECK(parsed[i].buckling_max == rows[i].buckling_max);
    CHECK(parsed[i].wallclock == rows[i].wallclock);
  }
}

TEST_CASE("state snapshots reparse to bit-identical clouds") {
  auto rng = oracles::test_rng(703);
  Vec3List x, v;
  std::vector<double> m;
  for (int i = 0; i < 6; ++i) {
    x.push_back(rng.uniform_in_ball(2.0));
    v.push_back(rng.normal3(1.0));
    m.push_back(rng.uniform(0.05, 0.3));
  }
  const StateFile parsed = parse_state_csv(state_csv(x, v, m));
  REQUIRE(parsed.x.size() == x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    CHECK((parsed.x[i] - x[i]).norm() == 0.0);
    CHECK((parsed.v[i] - v[i]).norm() == 0.0);
    CHECK(parsed.m[i] == m[i]);
  }
  CHECK_THROWS_AS(parse_state_csv("x,y,z\n1,2,3\n"), io_error);
}

TEST_CASE("rate fit recovers exact power laws") {
  std::vector<std::pair<double, double>> half, flat;
  for (const double n : {256.0, 512.0, 1024.0, 2048.0}) {
    half.emplace_back(n, 3.7 / std::sqrt(n));
    flat.emplace_back(n, 0.42);
  }
  const FitResult h = fit_rate(half);
  CHECK(std::abs(h.slope + 0.5) <= 1e-12);
  CHECK(std::abs(std::exp(h.intercept) - 3.7) <= 1e-12);
  CHECK(h.residual <= 1e-13);
  const FitResult f = fit_rate(flat);
  CHECK(std::abs(f.slope) <= 1e-12);
  CHECK_THROWS_AS(fit_rate({{256.0, 1.0}}), validation_error);
  CHECK_THROWS_AS(fit_rate({{256.0, 1.0}, {512.0, -2.0}}), validation_error);
  CHECK_THROWS_AS(fit_rate({{256.0, 1.0}, {256.0, 2.0}}), validation_error);
}

// 5% multiplicative noise perturbs the fitted slope of an N^(-1/3) law by
// sigma ~ 0.05/sqrt(Sxx) ~ 0.032 on the default sweep, so the documented
// band [-0.43, -0.23] sits at +-3.1 sigma.  Fixed seeds keep this
// deterministic; the band was validated externally over 2e5 draws
// (coverage 99.77%, extremes -0.484/-0.185).
TEST_CASE("rate fit tolerates multiplicative noise around N^(-1/3)") {
  for (const std::uint64_t seed : {1, 2, 3, 4, 5}) {
    auto rng = oracles::test_rng(704, seed);
    std::vector<std::pair<double, double>> pairs;
    for (const double n : {256.0, 512.0, 1024.0, 2048.0})
      pairs.emplace_back(n, std::pow(n, -1.0 / 3.0) * (1.0 + 0.05 * rng.normal()));
    const FitResult fit = fit_rate(pairs);
    CHECK(fit.slope >= -0.43);
    CHECK(fit.slope <= -0.23);
  }
}

TEST_CASE("time grid lands exactly on the horizon") {
  const TimeGrid even = TimeGrid::make(0.5, 0.01);
  CHECK(even.n_steps == 50);
  CHECK(even.time_of(50) == 0.5);
  CHECK(even.step_size(49) == doctest::Approx(0.01));
  const TimeGrid ragged = TimeGrid::make(0.025, 0.01);
  CHECK(ragged.n_steps == 3);
  CHECK(ragged.time_of(3) == 0.025);
  CHECK(ragged.step_size(2) == doctest::Approx(0.005));
  const TimeGrid zero = TimeGrid::make(0.0, 0.01);
  CHECK(zero.n_steps == 0);
  CHECK(zero.time_of(0) == 0.0);

  CHECK(even.is_sample(0, 10));
  CHECK(even.is_sample(50, 10));
  CHECK(even.is_sample(20, 10));
  CHECK_FALSE(even.is_sample(25, 10));
  CHECK(even.is_sample(0, 0));
  CHECK(even.is_sample(50, 0));
  CHECK_FALSE(even.is_sample(25, 0));
}

TEST_CASE("sweep of one N yields seeds-per-N runs at every sample time") {
  const ExperimentConfig cfg = tiny_converge_config("one_n");
  const ConvergeResult r = run_converge(cfg);
  CHECK(r.failed_runs.empty());
  // 3 runs x samples at t = 0, 0.01, 0.02.
  REQUIRE(r.rows.size() == 9);
  for (const ConvergenceRow& row : r.rows) {
    CHECK(row.n == 16);
    if (row.t == 0.0) CHECK(row.w2_phase == 0.0);
    CHECK(row.dmin_ratio > 0.0);
    CHECK(row.s2_ratio > 0.0);
  }
  const std::string csv = read_file(cfg.output_dir + "/converge.csv");
  CHECK(parse_convergence_csv(csv).size() == 9);
}

TEST_CASE("converge runs are reproducible across thread counts modulo wallclock") {
  ExperimentConfig cfg = tiny_converge_config("det1");
  cfg.threads = 1;
  run_converge(cfg);
  ExperimentConfig cfg4 = tiny_converge_config("det4");
  cfg4.threads = 4;
  run_converge(cfg4);
  CHECK(mask_wallclock(read_file(cfg.output_dir + "/converge.csv")) ==
        mask_wallclock(read_file(cfg4.output_dir + "/converge.csv")));
  CHECK(read_file(cfg.output_dir + "/summary.json") ==
        read_file(cfg4.output_dir + "/summary.json"));
}

TEST_CASE("converge requires a sweep and coupled clouds") {
  ExperimentConfig no_sweep;
  no_sweep.output_dir = fresh_dir("bad1").string();
  CHECK_THROWS_AS(run_converge(no_sweep), validation_error);
  ExperimentConfig iid = tiny_converge_config("bad2");
  iid.m = 16;
  CHECK_THROWS_AS(run_converge(iid), validation_error);
}

TEST_CASE("failed runs are recorded without aborting the sweep") {
  ExperimentConfig cfg = tiny_converge_config("fails");
  cfg.drag.tol = 1e-300;
  cfg.drag.max_iter = 1;
  const ConvergeResult r = run_converge(cfg);
  CHECK(r.rows.empty());
  REQUIRE(r.failed_runs.size() == 3);
  CHECK(r.failed_runs.front().find("N=16") != std::string::npos);
  const auto summary = nlohmann::json::parse(read_file(cfg.output_dir + "/summary.json"));
  CHECK(summary["acceptance"]["w2_convergence"] == "fail");
  CHECK_FALSE(summary["results"]["failed_runs"].empty());
}

TEST_CASE("summary carries the version, config echo, and one flag per criterion") {
  const ExperimentConfig cfg = tiny_converge_config("summary");
  run_converge(cfg);
  const auto summary = nlohmann::json::parse(read_file(cfg.output_dir + "/summary.json"));
  CHECK(summary["version"] == kVersion);
  CHECK(summary["run_type"] == "converge");
  CHECK(summary["config"]["N"].is_string());
  CHECK_FALSE(summary["config"].contains("threads"));
  CHECK_FALSE(summary["config"].contains("output_dir"));

  const char* criteria[] = {
      "single_particle_relaxation", "decoupled_cloud_relaxation", "min_distance_preservation",
      "s2_control", "buckling_bound", "w2_convergence", "drag_solver_oracle",
      "fluid_solver_oracle", "transport_exactness", "kernel_accuracy", "energy_dissipation",
      "thread_determinism"};
  CHECK(summary["acceptance"].size() == 12);
  for (const char* key : criteria) {
    CAPTURE(key);
    REQUIRE(summary["acceptance"].contains(key));
    const std::string value = summary["acceptance"][key];
    CHECK((value == "pass" || value == "fail" || value == "not_evaluated"));
  }
  // A sweep of one N cannot support rate or envelope fits.
  CHECK(summary["acceptance"]["w2_convergence"] == "not_evaluated");
  CHECK(summary["fits"]["slope"].is_null());
}

TEST_CASE("config validation rejects inconsistent experiment setups") {
  ExperimentConfig cfg;
  cfg.dt = 0.0;
  CHECK_THROWS_AS(cfg.validate(), validation_error);
  cfg = ExperimentConfig{};
  cfg.horizon = -0.1;
  CHECK_THROWS_AS(cfg.validate(), validation_error);
  cfg = ExperimentConfig{};
  cfg.m = 0;
  CHECK_THROWS_AS(cfg.validate(), validation_error);
  cfg = ExperimentConfig{};
  cfg.sweep.n_values = {128, 64};
  CHECK_THROWS_AS(cfg.validate(), validation_error);
  cfg = ExperimentConfig{};
  cfg.diag_interval = -1;
  CHECK_THROWS_AS(cfg.validate(), validation_error);
}
