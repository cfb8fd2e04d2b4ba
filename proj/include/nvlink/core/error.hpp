#pragma once

#include <stdexcept>
#include <string>

namespace nvlink {

// Invalid user configuration (bad key, out-of-range parameter). CLI exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A numerical invariant failed at runtime: non-unitary gate, zero-norm
// projection, trace drift. CLI exit code 3.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace nvlink
