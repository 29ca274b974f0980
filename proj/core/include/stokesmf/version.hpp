#pragma once

namespace stokesmf {

// Reported in summary.json and by the CLI.  Fixed string, never derived
// from build time, so that repeated runs emit byte-identical outputs.
inline constexpr const char* kVersion = "stokesmf 0.1.0";

}  // namespace stokesmf
