#pragma once

#include <stdexcept>
#include <string>

namespace optopulse {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An argument lies outside the physical domain of an operation
/// (negative occupation, chi <= 1 for a squeezing lifetime, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// The truncated Fock space cannot represent the state to the required
/// accuracy.
class TruncationError : public Error {
 public:
  using Error::Error;
};

/// A sampling grid is too narrow, too short or too coarse.
class GridError : public Error {
 public:
  using Error::Error;
};

/// Iterative numerics failed (integrator, root finder, fit).
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace optopulse
