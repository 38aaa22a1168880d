#pragma once

#include <stdexcept>
#include <string>

namespace benchtrack {

// Base class for everything this library throws on purpose.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

class ParseError : public Error {
 public:
  using Error::Error;
};

// Volatility matrix numerically singular (condition check failed).
class SingularSigma : public Error {
 public:
  using Error::Error;
};

// Zero drift vector: the market price of risk is undefined.
class ZeroMu : public Error {
 public:
  using Error::Error;
};

// A standing model assumption fails in a way that blocks computation.
class AssumptionViolated : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

// Quadrature / root finding / interpolation failure.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class GridError : public Error {
 public:
  using Error::Error;
};

// Dual inversion could not bracket a root inside the evaluable range.
class BracketError : public Error {
 public:
  using Error::Error;
};

// Second derivative of the dual lost strict positivity.
class ConvexityError : public Error {
 public:
  using Error::Error;
};

// The exponent of the injection lower bound requires ell in (0,1).
class DegenerateEll : public Error {
 public:
  using Error::Error;
};

class FieldCoverageError : public Error {
 public:
  using Error::Error;
};

}  // namespace benchtrack
