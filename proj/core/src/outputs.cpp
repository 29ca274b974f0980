#include "stokesmf/outputs.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <system_error>

#include "stokesmf/errors.hpp"

namespace stokesmf {

const char* const kDiagnosticsHeader =
    "t,d_min,s2_over_n,v_inf,nf_inf,buckling,v2_over_sqrt_n,lipschitz_proxy";
const char* const kConvergenceHeader =
    "N,seed,t,w2_phase,w2_space,dmin_ratio,s2_ratio,buckling_max,wallclock";

namespace {
const char* const kStateMarker = "# stokesmf-state v1";
const char* const kStateHeader = "x,y,z,vx,vy,vz,m";
}  // namespace

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc{}) throw io_error("format_double: to_chars failed");
  return std::string(buf, ptr);
}

double parse_double(const std::string& s) {
  const char* begin = s.data();
  const char* end = begin + s.size();
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(begin, end, out);
  if (ec != std::errc{} || ptr != end)
    throw io_error("parse_double: cannot parse '" + s + "'");
  return out;
}

void atomic_write_file(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(target.parent_path(), ec);
    if (ec) throw io_error("cannot create directory " + target.parent_path().string());
  }
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error("cannot open " + tmp.string() + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw io_error("write failed: " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) throw io_error("cannot rename " + tmp.string() + " to " + path);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string::size_type start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

std::vector<std::string> csv_body_lines(const std::string& text, const char* header,
                                        const char* what) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != header)
    throw io_error(std::string(what) + ": missing header '" + header + "'");
  std::vector<std::string> lines;
  while (std::getline(in, line))
    if (!line.empty()) lines.push_back(line);
  return lines;
}

}  // namespace

std::string diagnostics_csv(const std::vector<DiagnosticsRecord>& records, int n) {
  const double sqrt_n = std::sqrt(static_cast<double>(n));
  std::string out = kDiagnosticsHeader;
  out += '\n';
  for (const DiagnosticsRecord& r : records) {
    out += format_double(r.t);
    out += ',';
    out += format_double(r.d_min);
    out += ',';
    out += format_double(r.s2_over_n);
    out += ',';
    out += format_double(r.v_inf);
    out += ',';
    out += format_double(r.nf_inf);
    out += ',';
    out += format_double(r.buckling);
    out += ',';
    out += format_double(r.v2 / sqrt_n);
    out += ',';
    if (r.lipschitz_proxy) out += format_double(*r.lipschitz_proxy);
    out += '\n';
  }
  return out;
}

std::vector<DiagnosticsRecord> parse_diagnostics_csv(const std::string& text, int n) {
  const double sqrt_n = std::sqrt(static_cast<double>(n));
  std::vector<DiagnosticsRecord> records;
  for (const std::string& line : csv_body_lines(text, kDiagnosticsHeader, "diagnostics csv")) {
    const auto f = split_csv_line(line);
    if (f.size() != 8) throw io_error("diagnostics csv: expected 8 fields, got line '" + line + "'");
    DiagnosticsRecord r;
    r.t = parse_double(f[0]);
    r.d_min = parse_double(f[1]);
    r.s2_over_n = parse_double(f[2]);
    r.v_inf = parse_double(f[3]);
    r.nf_inf = parse_double(f[4]);
    r.buckling = parse_double(f[5]);
    r.v2 = parse_double(f[6]) * sqrt_n;
    if (!f[7].empty()) r.lipschitz_proxy = parse_double(f[7]);
    records.push_back(r);
  }
  return records;
}

std::string convergence_csv(const std::vector<ConvergenceRow>& rows) {
  std::string out = kConvergenceHeader;
  out += '\n';
  for (const ConvergenceRow& r : rows) {
    out += std::to_string(r.n);
    out += ',';
    out += std::to_string(r.seed);
    out += ',';
    out += format_double(r.t);
    out += ',';
    out += format_double(r.w2_phase);
    out += ',';
    out += format_double(r.w2_space);
    out += ',';
    out += format_double(r.dmin_ratio);
    out += ',';
    out += format_double(r.s2_ratio);
    out += ',';
    out += format_double(r.buckling_max);
    out += ',';
    out += format_double(r.wallclock);
    out += '\n';
  }
  return out;
}

std::vector<ConvergenceRow> parse_convergence_csv(const std::string& text) {
  std::vector<ConvergenceRow> rows;
  for (const std::string& line : csv_body_lines(text, kConvergenceHeader, "convergence csv")) {
    const auto f = split_csv_line(line);
    if (f.size() != 9) throw io_error("convergence csv: expected 9 fields, got line '" + line + "'");
    ConvergenceRow r;
    r.n = static_cast<int>(parse_double(f[0]));
    r.seed = static_cast<int>(parse_double(f[1]));
    r.t = parse_double(f[2]);
    r.w2_phase = parse_double(f[3]);
    r.w2_space = parse_double(f[4]);
    r.dmin_ratio = parse_double(f[5]);
    r.s2_ratio = parse_double(f[6]);
    r.buckling_max = parse_double(f[7]);
    r.wallclock = parse_double(f[8]);
    rows.push_back(r);
  }
  return rows;
}

std::string state_csv(const Vec3List& x, const Vec3List& v, const std::vector<double>& m) {
  if (x.size() != v.size() || x.size() != m.size())
    throw validation_error("state_csv: x, v, m must have equal length");
  std::string out = kStateMarker;
  out += '\n';
  out += kStateHeader;
  out += '\n';
  for (std::size_t i = 0; i < x.size(); ++i) {
    out += format_double(x[i].x());
    out += ',';
    out += format_double(x[i].y());
    out += ',';
    out += format_double(x[i].z());
    out += ',';
    out += format_double(v[i].x());
    out += ',';
    out += format_double(v[i].y());
    out += ',';
    out += format_double(v[i].z());
    out += ',';
    out += format_double(m[i]);
    out += '\n';
  }
  return out;
}

StateFile parse_state_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kStateMarker)
    throw io_error("state csv: missing marker line '" + std::string(kStateMarker) + "'");
  if (!std::getline(in, line) || line != kStateHeader)
    throw io_error("state csv: missing header '" + std::string(kStateHeader) + "'");
  StateFile s;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 7) throw io_error("state csv: expected 7 fields, got line '" + line + "'");
    s.x.emplace_back(parse_double(f[0]), parse_double(f[1]), parse_double(f[2]));
    s.v.emplace_back(parse_double(f[3]), parse_double(f[4]), parse_double(f[5]));
    s.m.push_back(parse_double(f[6]));
  }
  return s;
}

}  // namespace stokesmf
