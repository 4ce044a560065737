#pragma once

#include <stdexcept>
#include <string>

namespace modfield {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes disagree. The message names both dimensions.
class DimensionError : public Error {
 public:
  using Error::Error;
  DimensionError(const std::string& what, long long expected, long long actual)
      : Error(what + ": expected " + std::to_string(expected) + ", got " +
              std::to_string(actual)) {}
};

/// Invalid configuration or argument values.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// File could not be opened, read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

/// File contents violate a format rule (bad magic, header, truncated blob).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// NaN/Inf encountered in a loss or function evaluation.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace modfield
