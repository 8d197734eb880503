#pragma once

#include <stdexcept>
#include <string>

#include "srelu/config.hpp"

SRELU_NAMESPACE_BEGIN

/// Operand dimensions are inconsistent with what an operation expects.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A binary file (dataset or parameter file) does not follow its format.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A configuration value is missing, out of range, or contradicts another.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

SRELU_NAMESPACE_END
