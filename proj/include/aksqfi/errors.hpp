#pragma once

#include <stdexcept>
#include <string>

namespace aksqfi {

/// Input violates a documented precondition (shape, Hermiticity, range).
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A numerically degenerate input, e.g. a matrix with no positive spectrum
/// or a subspace that retains no trace.
class DegenerateInputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad or incomplete configuration (missing calibration rows, bad JSON keys).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A closed-form threshold that has no finite value for the given inputs.
class DivergenceError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

}  // namespace aksqfi
