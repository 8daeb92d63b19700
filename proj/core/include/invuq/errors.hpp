#pragma once

#include <stdexcept>
#include <string>

namespace invuq {

/// Bad or inconsistent user configuration (CLI exit code 2).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Numerical failure: non-convergence, indefinite matrix, NaN, dewatering
/// (CLI exit code 3).
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A required on-disk artifact is missing or unreadable (CLI exit code 4).
struct MissingArtifact : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace invuq
