#pragma once

#include <stdexcept>
#include <string>

namespace magictrap {

// Precondition violations on inputs throw std::invalid_argument. The types
// below separate configuration, numerical, and I/O failures so the CLI can map
// them onto distinct exit codes.

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Quadratic for the polarization has negative discriminant.
class NoRealRootError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

// Real roots exist but none lies in (0, 1].
class NoRootInRangeError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class NonConvergenceError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class RankDeficiencyError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

// Data carries no information about the requested quantity.
class DegenerateDataError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class AliasingError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace magictrap
