#pragma once

#include <optional>
#include <string>
#include <vector>

#include "stokesmf/metrics.hpp"
#include "stokesmf/vec.hpp"

namespace stokesmf {

// Shortest decimal string that round-trips the exact double. Infinities
// print as "inf"/"-inf" and parse back; this is the only numeric format
// used in CSV output, so files are byte-stable across platforms and
// thread counts.
std::string format_double(double v);
double parse_double(const std::string& s);

// Writes to path + ".tmp" then renames, so readers never observe a
// partial file. Creates parent directories as needed.
void atomic_write_file(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);

// diagnostics.csv: one row per sampled time. v2_over_sqrt_n stores
// |V|_2 / sqrt(N); lipschitz_proxy is empty for micro runs.
extern const char* const kDiagnosticsHeader;
std::string diagnostics_csv(const std::vector<DiagnosticsRecord>& records, int n);
std::vector<DiagnosticsRecord> parse_diagnostics_csv(const std::string& text, int n);

// converge.csv: one row per (N, run, sampled time) of the convergence
// study. seed holds the run index within the sweep, wallclock the
// per-run elapsed seconds (the one column excluded from determinism
// comparisons).
struct ConvergenceRow {
  int n = 0;
  int seed = 0;
  double t = 0.0;
  double w2_phase = 0.0;
  double w2_space = 0.0;
  double dmin_ratio = 0.0;
  double s2_ratio = 0.0;
  double buckling_max = 0.0;
  double wallclock = 0.0;
};

extern const char* const kConvergenceHeader;
std::string convergence_csv(const std::vector<ConvergenceRow>& rows);
std::vector<ConvergenceRow> parse_convergence_csv(const std::string& text);

// State snapshot: '# stokesmf-state v1' marker line, a column header,
// then x,y,z,vx,vy,vz,m rows. Micro snapshots carry m = 1/N.
struct StateFile {
  Vec3List x;
  Vec3List v;
  std::vector<double> m;
};

std::string state_csv(const Vec3List& x, const Vec3List& v, const std::vector<double>& m);
StateFile parse_state_csv(const std::string& text);

}  // namespace stokesmf
