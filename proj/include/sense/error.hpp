#pragma once

#include <stdexcept>
#include <string>

namespace sense {

/// Base of every error raised by the library. The CLI maps the concrete
/// subclass to a process exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid counts, dimensions or settings.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Unreadable/unwritable files, malformed file contents.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Mismatched dimensions between operands.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the domain of an operation (zero norm, empty input...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Operation not allowed in the object's current state.
class StateError : public Error {
 public:
  using Error::Error;
};

/// Malformed tagged transcript. offset is the code-point offset of the fault.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : Error(what + " at character " + std::to_string(offset)), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

/// Non-finite values during optimization.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace sense
