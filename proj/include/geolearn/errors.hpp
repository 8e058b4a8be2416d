#pragma once

#include <stdexcept>
#include <string>

namespace geolearn {

/// Invalid input to an operation (bad index, wrong dimension, broken precondition).
struct ArgumentError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Problem too large for the dense/sparse solvers or index codecs.
struct CapacityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Iterative method failed or produced non-finite values.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Experiment configuration is malformed or inconsistent.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Requested model family or geometry is not implemented.
struct UnsupportedError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace geolearn
