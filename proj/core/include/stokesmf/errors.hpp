#pragma once

#include <stdexcept>
#include <string>

namespace stokesmf {

// Bad inputs: malformed config, out-of-range arguments, schema violations.
// The CLI maps this to exit code 1.
class validation_error : public std::invalid_argument {
 public:
  explicit validation_error(const std::string& what) : std::invalid_argument(what) {}
};

// Failures during execution: non-convergent solves, particle overlap,
// unwritable outputs.  The CLI maps this to exit code 2.
class solver_error : public std::runtime_error {
 public:
  solver_error(const std::string& what, int iterations, double last_residual)
      : std::runtime_error(what), iterations(iterations), last_residual(last_residual) {}
  explicit solver_error(const std::string& what)
      : std::runtime_error(what), iterations(0), last_residual(0.0) {}

  int iterations;
  double last_residual;
};

class io_error : public std::runtime_error {
 public:
  explicit io_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace stokesmf
