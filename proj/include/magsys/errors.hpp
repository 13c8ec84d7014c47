#pragma once

#include <array>
#include <stdexcept>
#include <string>

namespace magsys {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A point lies outside the chart domain of a surface.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// The requested operation is not defined for this surface or field.
class UnsupportedOperation : public Error {
 public:
  using Error::Error;
};

/// A documented precondition of an operation is violated.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// A positivity requirement (min f > 0) is violated.
class PositivityError : public PreconditionError {
 public:
  using PreconditionError::PreconditionError;
};

/// Wrong number of arguments for a polynomial evaluation.
class ArityError : public Error {
 public:
  using Error::Error;
};

/// Malformed field expression or configuration.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// The capping disc implied by a chart is not admissible for the curve.
class AdmissibilityError : public Error {
 public:
  using Error::Error;
};

/// An angle sum that should be an integer is not close to one.
class ResolutionError : public Error {
 public:
  using Error::Error;
};

/// The adaptive integrator could not reach the requested end time.
class IntegrationError : public Error {
 public:
  IntegrationError(const std::string& what, double t, std::array<double, 3> last_state)
      : Error(what), t_(t), last_state_(last_state) {}
  double time() const { return t_; }
  const std::array<double, 3>& last_state() const { return last_state_; }

 private:
  double t_;
  std::array<double, 3> last_state_;
};

/// Internal consistency check failed (should be impossible for valid input).
class ConsistencyError : public Error {
 public:
  using Error::Error;
};

}  // namespace magsys
