#pragma once

#include <stdexcept>
#include <string>

namespace nda {

/// Base of every error raised by the library. The CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class FormatError : public Error {
public:
  using Error::Error;
};

class UnsupportedError : public Error {
public:
  using Error::Error;
};

class IoError : public Error {
public:
  using Error::Error;
};

class DimensionError : public Error {
public:
  using Error::Error;
};

class ArgumentError : public Error {
public:
  using Error::Error;
};

class DomainError : public Error {
public:
  using Error::Error;
};

class ConfigError : public Error {
public:
  using Error::Error;
};

class FeasibilityError : public Error {
public:
  using Error::Error;
};

// Raised when a NaN shows up in a gradient; names the offending parameter.
class PoisonedGradientError : public Error {
public:
  PoisonedGradientError(std::string parameter, const std::string &what)
      : Error(what), parameter_(std::move(parameter)) {}
  const std::string &parameter() const noexcept { return parameter_; }

private:
  std::string parameter_;
};

// Raised when a trainer produces a non-finite loss.
class TrainingDivergenceError : public Error {
public:
  TrainingDivergenceError(long step, const std::string &what) : Error(what), step_(step) {}
  long step() const noexcept { return step_; }

private:
  long step_;
};

} // namespace nda
