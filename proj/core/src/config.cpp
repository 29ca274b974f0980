#include "stokesmf/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "stokesmf/errors.hpp"
#include "stokesmf/outputs.hpp"

namespace stokesmf {

namespace {

struct KeySpec {
  const char* key;
  const char* type;
  const char* def;
  const char* doc;
};

// Single source of truth for the config schema; serialize_config and the
// generated reference page both walk this table.
const std::vector<KeySpec>& registry() {
  static const std::vector<KeySpec> keys = {
      {"N", "int", "256", "particle count of the microscopic system"},
      {"M", "int | coupled", "coupled",
       "characteristic count of the cloud; 'coupled' copies the micro initial state (same "
       "positions, masses 1/N)"},
      {"T", "real", "0.5", "time horizon; 0 emits only the initial diagnostics"},
      {"dt", "real", "0.01", "RK4 step; the final step is shortened when T is not a multiple"},
      {"seed", "uint64", "0", "master seed; every RNG stream is derived from it"},
      {"threads", "int", "0",
       "worker threads (0 = hardware); execution-only, never affects output bytes"},
      {"output_dir", "string", "out", "directory receiving the output files"},
      {"diag_interval", "int", "10",
       "steps between diagnostics samples; 0 samples only t = 0 and t = T"},
      {"initial.rho0", "uniform_ball | gaussian", "uniform_ball",
       "position density preset; gaussian is isotropic, truncated at 3 sigma"},
      {"initial.rho0.radius", "real", "1", "support radius of the uniform ball"},
      {"initial.rho0.sigma", "real", "1", "scale of the gaussian preset"},
      {"initial.w0", "constant | shear | rotation | affine", "shear",
       "velocity profile preset: value, matrix*x, omega x x, value + matrix*x"},
      {"initial.w0.value", "vec3", "0 0 0", "constant part of w0"},
      {"initial.w0.matrix", "mat3 (9 reals, row-major)", "0 0 1 0 0 0 0 0 0",
       "linear part of w0; the default is a unit shear"},
      {"initial.w0.omega", "vec3", "0 0 1", "rotation rate of the rotation preset"},
      {"initial.g", "vec3", "0 0 -1", "gravity"},
      {"initial.chi", "real", "0.2", "hard-core exclusion radius factor: r_ex = chi * N^(-1/2)"},
      {"sampling.max_attempts", "int", "10000", "per-point rejection budget of the sampler"},
      {"blob.kappa", "real", "0.02",
       "blob radius scale: d = min(kappa * N^(-1/2), d_min/6), clamped to >= 4R"},
      {"drag.tol", "real", "1e-12", "max-norm residual tolerance of the drag solve"},
      {"drag.max_iter", "int", "200", "iteration cap of the drag fixed point"},
      {"drag.method", "fixed_point | dense_direct", "fixed_point",
       "dense_direct LU-solves the 3N x 3N system (N <= 512)"},
      {"fluid.tol", "real", "1e-12", "max-norm residual tolerance of the fluid solve"},
      {"fluid.max_iter", "int", "200", "iteration cap of the fluid fixed point"},
      {"fluid.method", "fixed_point | dense_direct", "fixed_point",
       "dense_direct LU-solves the 3M x 3M system (M <= 512)"},
      {"meso.coupling", "on | off", "on",
       "off forces u = 0, reducing the cloud to independent linear relaxation"},
      {"meso.delta_factor", "real", "0.5",
       "mollification length delta = factor * (rho0 support diameter) * M^(-1/3)"},
      {"meso.lipschitz_warn", "real", "0",
       "warn when the velocity Lipschitz monitor exceeds this; 0 disables"},
      {"w2.method", "exact | entropic", "exact", "transport solver for distance evaluations"},
      {"w2.cap", "int", "2048", "exact-method size limit"},
      {"w2.entropic_fallback", "on | off", "off",
       "above the cap, fall back to the entropic solver instead of failing"},
      {"w2.epsilon_factor", "real", "1e-3",
       "entropic regularization eps = factor * (bounding-box diagonal)^2"},
      {"sweep", "int list", "",
       "comma-separated strictly increasing N values for the convergence study"},
      {"sweep.seeds_per_n", "int", "3", "independent runs per sweep value"},
      {"snapshot.final", "on | off", "on",
       "write state_initial.csv and state_final.csv for single runs"},
  };
  return keys;
}

bool known_key(const std::string& k) {
  for (const KeySpec& spec : registry())
    if (k == spec.key) return true;
  return false;
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value,
                            const std::string& want) {
  throw validation_error("config key '" + key + "': cannot parse '" + value + "' as " + want);
}

double parse_real(const std::string& key, const std::string& value) {
  const char* begin = value.data();
  const char* end = begin + value.size();
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(begin, end, out);
  if (ec != std::errc{} || ptr != end) bad_value(key, value, "a real number");
  return out;
}

long long parse_int(const std::string& key, const std::string& value) {
  const char* begin = value.data();
  const char* end = begin + value.size();
  long long out = 0;
  auto [ptr, ec] = std::from_chars(begin, end, out);
  if (ec != std::errc{} || ptr != end) bad_value(key, value, "an integer");
  return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  const char* begin = value.data();
  const char* end = begin + value.size();
  std::uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(begin, end, out);
  if (ec != std::errc{} || ptr != end) bad_value(key, value, "an unsigned 64-bit integer");
  return out;
}

bool parse_on_off(const std::string& key, const std::string& value) {
  if (value == "on") return true;
  if (value == "off") return false;
  bad_value(key, value, "on | off");
}

std::vector<double> parse_reals(const std::string& key, const std::string& value, int count) {
  std::istringstream in(value);
  std::vector<double> out;
  std::string tok;
  while (in >> tok) out.push_back(parse_real(key, tok));
  if (static_cast<int>(out.size()) != count)
    bad_value(key, value, std::to_string(count) + " whitespace-separated reals");
  return out;
}

Vec3 parse_vec3(const std::string& key, const std::string& value) {
  const auto v = parse_reals(key, value, 3);
  return {v[0], v[1], v[2]};
}

Mat3 parse_mat3(const std::string& key, const std::string& value) {
  const auto v = parse_reals(key, value, 9);
  Mat3 m;
  m << v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8];
  return m;
}

std::vector<int> parse_int_list(const std::string& key, const std::string& value) {
  std::vector<int> out;
  std::string token;
  std::istringstream in(value);
  while (std::getline(in, token, ',')) {
    const auto strip = [](std::string s) {
      const auto a = s.find_first_not_of(" \t");
      const auto b = s.find_last_not_of(" \t");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    token = strip(token);
    if (token.empty()) bad_value(key, value, "a comma-separated integer list");
    out.push_back(static_cast<int>(parse_int(key, token)));
  }
  return out;
}

std::string trim(std::string_view s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string_view::npos) return {};
  const auto b = s.find_last_not_of(" \t\r");
  return std::string(s.substr(a, b - a + 1));
}

void apply(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "N") {
    cfg.n = static_cast<int>(parse_int(key, value));
  } else if (key == "M") {
    if (value == "coupled")
      cfg.m.reset();
    else
      cfg.m = static_cast<int>(parse_int(key, value));
  } else if (key == "T") {
    cfg.horizon = parse_real(key, value);
  } else if (key == "dt") {
    cfg.dt = parse_real(key, value);
  } else if (key == "seed") {
    cfg.seed = parse_u64(key, value);
  } else if (key == "threads") {
    cfg.threads = static_cast<int>(parse_int(key, value));
  } else if (key == "output_dir") {
    cfg.output_dir = value;
  } else if (key == "diag_interval") {
    cfg.diag_interval = static_cast<int>(parse_int(key, value));
  } else if (key == "initial.rho0") {
    if (value == "uniform_ball")
      cfg.initial.rho0 = Rho0Kind::uniform_ball;
    else if (value == "gaussian")
      cfg.initial.rho0 = Rho0Kind::gaussian;
    else
      bad_value(key, value, "uniform_ball | gaussian");
  } else if (key == "initial.rho0.radius") {
    cfg.initial.radius = parse_real(key, value);
  } else if (key == "initial.rho0.sigma") {
    cfg.initial.sigma = parse_real(key, value);
  } else if (key == "initial.w0") {
    if (value == "constant")
      cfg.initial.w0 = W0Kind::constant;
    else if (value == "shear")
      cfg.initial.w0 = W0Kind::shear;
    else if (value == "rotation")
      cfg.initial.w0 = W0Kind::rotation;
    else if (value == "affine")
      cfg.initial.w0 = W0Kind::affine;
    else
      bad_value(key, value, "constant | shear | rotation | affine");
  } else if (key == "initial.w0.value") {
    cfg.initial.value = parse_vec3(key, value);
  } else if (key == "initial.w0.matrix") {
    cfg.initial.matrix = parse_mat3(key, value);
  } else if (key == "initial.w0.omega") {
    cfg.initial.omega = parse_vec3(key, value);
  } else if (key == "initial.g") {
    cfg.initial.g = parse_vec3(key, value);
  } else if (key == "initial.chi") {
    cfg.initial.chi = parse_real(key, value);
  } else if (key == "sampling.max_attempts") {
    cfg.initial.max_attempts = static_cast<int>(parse_int(key, value));
  } else if (key == "blob.kappa") {
    cfg.blob_kappa = parse_real(key, value);
  } else if (key == "drag.tol") {
    cfg.drag.tol = parse_real(key, value);
  } else if (key == "drag.max_iter") {
    cfg.drag.max_iter = static_cast<int>(parse_int(key, value));
  } else if (key == "drag.method") {
    if (value == "fixed_point")
      cfg.drag.method = DragMethod::fixed_point;
    else if (value == "dense_direct")
      cfg.drag.method = DragMethod::dense_direct;
    else
      bad_value(key, value, "fixed_point | dense_direct");
  } else if (key == "fluid.tol") {
    cfg.fluid.tol = parse_real(key, value);
  } else if (key == "fluid.max_iter") {
    cfg.fluid.max_iter = static_cast<int>(parse_int(key, value));
  } else if (key == "fluid.method") {
    if (value == "fixed_point")
      cfg.fluid.dense_direct = false;
    else if (value == "dense_direct")
      cfg.fluid.dense_direct = true;
    else
      bad_value(key, value, "fixed_point | dense_direct");
  } else if (key == "meso.coupling") {
    cfg.fluid.coupling = parse_on_off(key, value);
  } else if (key == "meso.delta_factor") {
    cfg.meso_delta_factor = parse_real(key, value);
  } else if (key == "meso.lipschitz_warn") {
    cfg.lipschitz_warn = parse_real(key, value);
  } else if (key == "w2.method") {
    if (value == "exact")
      cfg.w2.method = TransportMethod::exact;
    else if (value == "entropic")
      cfg.w2.method = TransportMethod::entropic;
    else
      bad_value(key, value, "exact | entropic");
  } else if (key == "w2.cap") {
    cfg.w2.cap = static_cast<int>(parse_int(key, value));
  } else if (key == "w2.entropic_fallback") {
    cfg.w2.entropic_fallback = parse_on_off(key, value);
  } else if (key == "w2.epsilon_factor") {
    cfg.w2.epsilon_factor = parse_real(key, value);
  } else if (key == "sweep") {
    cfg.sweep.n_values = parse_int_list(key, value);
  } else if (key == "sweep.seeds_per_n") {
    cfg.sweep.seeds_per_n = static_cast<int>(parse_int(key, value));
  } else if (key == "snapshot.final") {
    cfg.snapshot_final = parse_on_off(key, value);
  } else {
    throw validation_error("config: unknown key '" + key + "'");
  }
}

std::string render(const ExperimentConfig& cfg, const std::string& key) {
  const auto real = [](double v) { return format_double(v); };
  const auto vec = [&](const Vec3& v) {
    return real(v.x()) + " " + real(v.y()) + " " + real(v.z());
  };
  if (key == "N") return std::to_string(cfg.n);
  if (key == "M") return cfg.m ? std::to_string(*cfg.m) : "coupled";
  if (key == "T") return real(cfg.horizon);
  if (key == "dt") return real(cfg.dt);
  if (key == "seed") return std::to_string(cfg.seed);
  if (key == "threads") return std::to_string(cfg.threads);
  if (key == "output_dir") return cfg.output_dir;
  if (key == "diag_interval") return std::to_string(cfg.diag_interval);
  if (key == "initial.rho0")
    return cfg.initial.rho0 == Rho0Kind::uniform_ball ? "uniform_ball" : "gaussian";
  if (key == "initial.rho0.radius") return real(cfg.initial.radius);
  if (key == "initial.rho0.sigma") return real(cfg.initial.sigma);
  if (key == "initial.w0") {
    switch (cfg.initial.w0) {
      case W0Kind::constant:
        return "constant";
      case W0Kind::shear:
        return "shear";
      case W0Kind::rotation:
        return "rotation";
      case W0Kind::affine:
        return "affine";
    }
  }
  if (key == "initial.w0.value") return vec(cfg.initial.value);
  if (key == "initial.w0.matrix") {
    std::string out;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) {
        if (!out.empty()) out += ' ';
        out += real(cfg.initial.matrix(r, c));
      }
    return out;
  }
  if (key == "initial.w0.omega") return vec(cfg.initial.omega);
  if (key == "initial.g") return vec(cfg.initial.g);
  if (key == "initial.chi") return real(cfg.initial.chi);
  if (key == "sampling.max_attempts") return std::to_string(cfg.initial.max_attempts);
  if (key == "blob.kappa") return real(cfg.blob_kappa);
  if (key == "drag.tol") return real(cfg.drag.tol);
  if (key == "drag.max_iter") return std::to_string(cfg.drag.max_iter);
  if (key == "drag.method")
    return cfg.drag.method == DragMethod::fixed_point ? "fixed_point" : "dense_direct";
  if (key == "fluid.tol") return real(cfg.fluid.tol);
  if (key == "fluid.max_iter") return std::to_string(cfg.fluid.max_iter);
  if (key == "fluid.method") return cfg.fluid.dense_direct ? "dense_direct" : "fixed_point";
  if (key == "meso.coupling") return cfg.fluid.coupling ? "on" : "off";
  if (key == "meso.delta_factor") return real(cfg.meso_delta_factor);
  if (key == "meso.lipschitz_warn") return real(cfg.lipschitz_warn);
  if (key == "w2.method") return cfg.w2.method == TransportMethod::exact ? "exact" : "entropic";
  if (key == "w2.cap") return std::to_string(cfg.w2.cap);
  if (key == "w2.entropic_fallback") return cfg.w2.entropic_fallback ? "on" : "off";
  if (key == "w2.epsilon_factor") return real(cfg.w2.epsilon_factor);
  if (key == "sweep") {
    std::string out;
    for (int v : cfg.sweep.n_values) {
      if (!out.empty()) out += ',';
      out += std::to_string(v);
    }
    return out;
  }
  if (key == "sweep.seeds_per_n") return std::to_string(cfg.sweep.seeds_per_n);
  if (key == "snapshot.final") return cfg.snapshot_final ? "on" : "off";
  throw validation_error("render: unknown key '" + key + "'");
}

}  // namespace

void ExperimentConfig::validate() const {
  if (n < 1) throw validation_error("config key 'N': must be at least 1");
  if (m && *m < 1) throw validation_error("config key 'M': must be at least 1 or 'coupled'");
  if (!(horizon >= 0.0)) throw validation_error("config key 'T': must be nonnegative");
  if (!(dt > 0.0)) throw validation_error("config key 'dt': must be positive");
  if (threads < 0) throw validation_error("config key 'threads': must be nonnegative");
  if (diag_interval < 0) throw validation_error("config key 'diag_interval': must be nonnegative");
  initial.validate();
  if (!(blob_kappa > 0.0)) throw validation_error("config key 'blob.kappa': must be positive");
  if (!(drag.tol > 0.0)) throw validation_error("config key 'drag.tol': must be positive");
  if (drag.max_iter < 1) throw validation_error("config key 'drag.max_iter': must be at least 1");
  if (!(fluid.tol > 0.0)) throw validation_error("config key 'fluid.tol': must be positive");
  if (fluid.max_iter < 1)
    throw validation_error("config key 'fluid.max_iter': must be at least 1");
  if (!(meso_delta_factor > 0.0))
    throw validation_error("config key 'meso.delta_factor': must be positive");
  if (!(lipschitz_warn >= 0.0))
    throw validation_error("config key 'meso.lipschitz_warn': must be nonnegative");
  if (w2.cap < 1) throw validation_error("config key 'w2.cap': must be at least 1");
  if (!(w2.epsilon_factor > 0.0))
    throw validation_error("config key 'w2.epsilon_factor': must be positive");
  for (std::size_t i = 0; i < sweep.n_values.size(); ++i) {
    if (sweep.n_values[i] < 2)
      throw validation_error("config key 'sweep': values must be at least 2");
    if (i > 0 && sweep.n_values[i] <= sweep.n_values[i - 1])
      throw validation_error("config key 'sweep': values must be strictly increasing");
  }
  if (sweep.seeds_per_n < 1)
    throw validation_error("config key 'sweep.seeds_per_n': must be at least 1");
}

double ExperimentConfig::delta_for(int cloud_size) const {
  return meso_delta_factor * initial.support_diameter() *
         std::pow(static_cast<double>(cloud_size), -1.0 / 3.0);
}

ExperimentConfig parse_config_text(const std::string& text, const std::string& origin) {
  ExperimentConfig cfg;
  std::map<std::string, int> seen;  // key -> first line
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos)
      throw validation_error(origin + ":" + std::to_string(lineno) +
                             ": expected 'key = value', got '" + stripped + "'");
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    if (key.empty())
      throw validation_error(origin + ":" + std::to_string(lineno) + ": empty key");
    if (!known_key(key))
      throw validation_error(origin + ":" + std::to_string(lineno) + ": unknown key '" + key +
                             "'");
    if (auto [it, inserted] = seen.emplace(key, lineno); !inserted)
      throw validation_error(origin + ":" + std::to_string(lineno) + ": duplicate key '" + key +
                             "' (first set on line " + std::to_string(it->second) + ")");
    apply(cfg, key, value);
  }
  cfg.validate();
  return cfg;
}

std::vector<int> parse_sweep_list(const std::string& text) {
  return parse_int_list("sweep", text);
}

ExperimentConfig parse_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw validation_error("config file not found: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), path);
}

std::string serialize_config(const ExperimentConfig& cfg) {
  std::string out;
  for (const KeySpec& spec : registry()) {
    out += spec.key;
    out += " = ";
    out += render(cfg, spec.key);
    out += '\n';
  }
  return out;
}

std::string config_reference_markdown() {
  std::string out = "# Configuration reference\n\n";
  out +=
      "Flat `key = value` lines; `#` starts a comment line; dotted prefixes group related "
      "keys. Unknown keys are errors.\n\n";
  out += "| key | type | default | description |\n|---|---|---|---|\n";
  const auto escaped = [](std::string s) {
    for (std::size_t i = 0; i < s.size(); ++i)
      if (s[i] == '|') s.replace(i++, 1, "\\|");
    return s;
  };
  for (const KeySpec& spec : registry()) {
    out += "| `";
    out += spec.key;
    out += "` | ";
    out += escaped(spec.type);
    out += " | `";
    out += *spec.def ? spec.def : " ";
    out += "` | ";
    out += escaped(spec.doc);
    out += " |\n";
  }
  return out;
}

}  // namespace stokesmf
