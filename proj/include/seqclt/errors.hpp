#pragma once

#include <stdexcept>
#include <string>

namespace seqclt {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A domain invariant or operation precondition does not hold
/// (non-expanding map, negative scale, mismatched grid sizes, ...).
class ConstraintError : public Error {
 public:
  using Error::Error;
};

/// An iterative numerical procedure failed: root-finding did not converge,
/// a series did not decay, an iteration cap was hit.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent study configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Report emission or input file failure.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace seqclt
