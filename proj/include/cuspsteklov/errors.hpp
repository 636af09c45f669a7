#pragma once

#include <stdexcept>
#include <string>

namespace cusp {

// Root of every error the library throws. The CLI maps categories to exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Argument outside an operation's admissible range (t outside [0,1], p <= 1, alpha <= 1).
class DomainError : public Error {
 public:
  using Error::Error;
};

class ParameterError : public Error {
 public:
  using Error::Error;
};

// Geometric inconsistency: off-boundary samples, non-simple polylines, inverted elements.
class GeometryError : public Error {
 public:
  using Error::Error;
};

class MeshBudgetError : public GeometryError {
 public:
  using GeometryError::GeometryError;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, int line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  int line() const noexcept { return line_; }

 private:
  int line_;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class NotSpdError : public Error {
 public:
  using Error::Error;
};

class SizeError : public Error {
 public:
  using Error::Error;
};

class WeightError : public Error {
 public:
  using Error::Error;
};

// Rayleigh quotient requested for a function with vanishing boundary norm.
class QuotientUndefined : public Error {
 public:
  using Error::Error;
};

class NonConvergenceError : public Error {
 public:
  NonConvergenceError(const std::string& what, double residual)
      : Error(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

}  // namespace cusp
