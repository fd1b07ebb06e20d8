#pragma once

#include <stdexcept>
#include <string>

namespace fracgi {

// Exit-code contract used by the command line front end.
enum class ExitCode : int { ok = 0, runtime = 1, usage = 2, domain = 3 };

class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
  virtual ExitCode exit_code() const noexcept { return ExitCode::runtime; }
};

// Bad input values or malformed arguments.
class UsageError : public Error {
public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::usage; }
};

// A moment or variance that diverges for the requested orders.
class DomainError : public Error {
public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::domain; }
};

class IoError : public Error {
public:
  using Error::Error;
};

// Malformed or version-mismatched serialized data.
class FormatError : public Error {
public:
  using Error::Error;
};

class ConvergenceError : public Error {
public:
  using Error::Error;
};

} // namespace fracgi
