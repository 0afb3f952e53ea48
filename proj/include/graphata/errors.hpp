#pragma once

#include <stdexcept>
#include <string>

namespace graphata {

// Base for every error raised by the library. Each subclass maps onto one
// failure family so callers (notably the CLI) can pick an exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Incompatible tensor/matrix dimensions.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf where finite values are required, or rows that are not distributions.
class NumericError : public Error {
 public:
  using Error::Error;
};

// An API used outside its preconditions (missing labels, r out of range, ...).
class UsageError : public Error {
 public:
  using Error::Error;
};

// Malformed input file. The message carries line/field context.
class ParseError : public Error {
 public:
  using Error::Error;
};

class CheckpointError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Non-finite loss during source training or adaptation.
class TrainingError : public Error {
 public:
  TrainingError(const std::string& what, int epoch) : Error(what), epoch_(epoch) {}
  int epoch() const { return epoch_; }

 private:
  int epoch_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace graphata
