#ifndef DICE_ERRORS_HPP_
#define DICE_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace dice {

/// Base of every error raised by the engine. The CLI maps subclasses onto
/// exit codes, so new failure classes should derive from one of these.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Declared shape and payload disagree, or a file is structurally malformed.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Values are present but unusable (NaN/Inf, bad labels, too few samples).
class DataError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the mathematical domain of the operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  using Error::Error;
};

}  // namespace dice

#endif  // DICE_ERRORS_HPP_
