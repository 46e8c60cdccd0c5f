#pragma once

#include <stdexcept>
#include <string>

namespace dfa {

/// Tensor extents that do not fit the operation.
struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// A scalar or size argument outside its admissible range.
struct ParameterError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// An operation that needs state (forward caches, running statistics) that is not there.
struct StateError : std::logic_error {
  using std::logic_error::logic_error;
};

/// NaN or Inf produced or consumed where finite values are required.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Malformed file content (IDX/CIFAR binaries, configs, checkpoints).
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace dfa
