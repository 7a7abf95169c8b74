#pragma once

#include <stdexcept>
#include <string>

namespace orient {

// Base for every recoverable failure raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class QuadratureNotConverged : public Error {
 public:
  using Error::Error;
};

class FitNotConverged : public Error {
 public:
  using Error::Error;
};

class DegenerateCovariance : public Error {
 public:
  using Error::Error;
};

class RejectionBudgetExceeded : public Error {
 public:
  using Error::Error;
};

class AntipodalViolation : public Error {
 public:
  using Error::Error;
};

class InfeasibleSpread : public Error {
 public:
  using Error::Error;
};

class CholeskyFailure : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Raised when a value violates a type invariant at construction.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

}  // namespace orient
