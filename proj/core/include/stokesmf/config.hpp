#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "stokesmf/initial_data.hpp"
#include "stokesmf/meso.hpp"
#include "stokesmf/micro.hpp"
#include "stokesmf/transport.hpp"

namespace stokesmf {

struct SweepSpec {
  std::vector<int> n_values;  // strictly increasing; empty = no sweep
  int seeds_per_n = 3;
};

// Full declarative description of a run.  Parsed from a flat key = value
// text format with dotted prefixes; every key, its type, default, and
// meaning live in one registry (config.cpp) from which the reference page
// is generated.
struct ExperimentConfig {
  int n = 256;
  std::optional<int> m;  // nullopt: coupled cloud of size N
  double horizon = 0.5;
  double dt = 0.01;
  std::uint64_t seed = 0;
  int threads = 0;  // 0 = hardware concurrency; execution-only, not echoed
  std::string output_dir = "out";
  int diag_interval = 10;  // steps between samples; 0 = endpoints only

  InitialDataSpec initial;

  double blob_kappa = 0.02;
  DragOptions drag;
  FluidOptions fluid;
  double meso_delta_factor = 0.5;
  double lipschitz_warn = 0.0;  // 0 disables the warning

  TransportOptions w2;
  SweepSpec sweep;
  bool snapshot_final = true;

  void validate() const;

  // Mollification length for a cloud of the given size: delta_factor *
  // (rho0 support diameter) * M^(-1/3).
  double delta_for(int cloud_size) const;
};

// Parses and validates; unknown keys, type mismatches, and constraint
// violations throw validation_error (parse errors carry the line number).
ExperimentConfig parse_config(const std::string& path);
ExperimentConfig parse_config_text(const std::string& text, const std::string& origin);

// Parses a comma-separated integer list, the value format of the "sweep"
// key (also used by the --sweep command-line override).
std::vector<int> parse_sweep_list(const std::string& text);

// Canonical text form containing every key in registry order; parsing it
// reproduces the config exactly.
std::string serialize_config(const ExperimentConfig& cfg);

// Markdown table of every key: name, type, default, description.
std::string config_reference_markdown();

}  // namespace stokesmf
