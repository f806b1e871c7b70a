#pragma once

#include <stdexcept>
#include <string>

namespace walnet {

/// Base of every error raised by the library. Callers that only need to
/// report a failure can catch this; the subclasses map onto the error kinds
/// the CLI turns into exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An argument outside its documented domain (negative k, zero target size).
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Malformed data: wrong shape, non-finite values, bad file contents.
class InputError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration: unknown keys, unknown strategy names, bad ranges.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Non-finite loss or gradient during optimisation.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Broken internal invariant. Seeing one of these is a bug.
class InternalError : public Error {
 public:
  using Error::Error;
};

}  // namespace walnet
