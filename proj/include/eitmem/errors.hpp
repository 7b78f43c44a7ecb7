#pragma once

#include <stdexcept>
#include <string>

namespace eitmem {

/// Bad user input: out-of-domain parameters, malformed files, unknown presets.
/// The CLI maps this family to exit code 2.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DomainError : public InputError {
 public:
  using InputError::InputError;
};

class ParseError : public InputError {
 public:
  ParseError(const std::string& what, std::size_t line)
      : InputError(what + " (line " + std::to_string(line) + ")"), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class GridMismatchError : public InputError {
 public:
  using InputError::InputError;
};

/// Numerical failure inside a solver. The CLI maps this family to exit code 3.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NonUniqueSteadyState : public SolverError {
 public:
  using SolverError::SolverError;
};

class StiffnessError : public SolverError {
 public:
  StiffnessError(const std::string& what, double suggested_step)
      : SolverError(what), suggested_step_(suggested_step) {}
  double suggested_step() const { return suggested_step_; }

 private:
  double suggested_step_;
};

class PositivityViolation : public SolverError {
 public:
  using SolverError::SolverError;
};

class NoTransparencyFeature : public SolverError {
 public:
  using SolverError::SolverError;
};

class SingularFitError : public SolverError {
 public:
  SingularFitError(const std::string& what, std::string parameter)
      : SolverError(what), parameter_(std::move(parameter)) {}
  const std::string& parameter() const { return parameter_; }

 private:
  std::string parameter_;
};

}  // namespace eitmem
