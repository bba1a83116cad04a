#pragma once

#include <stdexcept>
#include <string>

namespace alignmix {

/// Shapes of two operands disagree.
class dimension_error : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// A configuration or distribution parameter is out of its domain.
class parameter_error : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// The similarity kernel e^{-M/eps} lost an entire row or column to underflow.
class underflow_error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Non-finite value in activations, gradients or parameters.
class numeric_error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Malformed dataset, checkpoint or config file.
class format_error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// The operation is not available for this model configuration.
class unsupported_error : public std::logic_error {
public:
  using std::logic_error::logic_error;
};

}  // namespace alignmix
