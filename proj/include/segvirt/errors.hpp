#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

#include "segvirt/units.hpp"

namespace segvirt {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidSizeError : public Error {
 public:
  using Error::Error;
};

class InsufficientMemoryError : public Error {
 public:
  using Error::Error;
};

/// A released range intersects memory that is already free (double free or
/// bookkeeping bug).
class OverlapError : public Error {
 public:
  using Error::Error;
};

class InconsistencyError : public Error {
 public:
  using Error::Error;
};

class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// Raised by translation when a guest-physical address lies outside every
/// mapped segment.
class DsnViolation : public Error {
 public:
  explicit DsnViolation(Bytes gpa);
  Bytes gpa() const noexcept { return gpa_; }

 private:
  Bytes gpa_;
};

class NoCandidateError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Malformed input. `line()` is 1-based, 0 when not tied to a line.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& reason);
  std::size_t line() const noexcept { return line_; }
  const std::string& reason() const noexcept { return reason_; }

 private:
  std::size_t line_;
  std::string reason_;
};

}  // namespace segvirt
