#pragma once

#include <stdexcept>
#include <string>

namespace carbonmkt {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad user input: malformed case files, invalid parameters, caller bugs.
class InputError : public Error {
 public:
  using Error::Error;
};

/// The numerical machinery could not produce a trustworthy answer.
class SolverError : public Error {
 public:
  using Error::Error;
};

class MalformedProgram : public InputError {
 public:
  using InputError::InputError;
};

class NumericalFailure : public SolverError {
 public:
  using SolverError::SolverError;
};

class CaseParseError : public InputError {
 public:
  CaseParseError(const std::string& what, int line, std::string field)
      : InputError(what), line_(line), field_(std::move(field)) {}
  int line() const noexcept { return line_; }
  const std::string& field() const noexcept { return field_; }

 private:
  int line_;
  std::string field_;
};

class InvariantViolation : public InputError {
 public:
  InvariantViolation(const std::string& field, const std::string& what)
      : InputError(field + ": " + what), field_(field) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

class DisconnectedNetwork : public InputError {
 public:
  using InputError::InputError;
};

class SingularSusceptance : public SolverError {
 public:
  using SolverError::SolverError;
};

class UnbalancedInjection : public InputError {
 public:
  using InputError::InputError;
};

class SingularSharingSystem : public SolverError {
 public:
  using SolverError::SolverError;
};

class TooLargeCase : public InputError {
 public:
  using InputError::InputError;
};

}  // namespace carbonmkt
