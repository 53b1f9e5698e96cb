#pragma once

#include <stdexcept>
#include <string>

namespace mrot {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input data violates a documented precondition (shape, finiteness,
/// weights, parameter ranges). The CLI maps this to exit code 2.
class DataError : public Error {
 public:
  using Error::Error;
};

/// A numerical routine cannot continue in its current mode, e.g. the
/// plain Sinkhorn kernel underflowed. Callers may retry in log domain.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// A persisted document carries a format version this build cannot read.
class VersionError : public DataError {
 public:
  using DataError::DataError;
};

}  // namespace mrot
