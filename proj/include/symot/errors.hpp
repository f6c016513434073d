#pragma once

#include <stdexcept>
#include <string>

namespace symot {

// Base for every error raised by the library. The CLI maps subclasses to
// stable exit codes (see exit_code()).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shapes or dimensions do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// A NaN/Inf appeared, or an optimization step produced a non-finite value.
class NumericError : public Error {
 public:
  using Error::Error;
};

// A value is outside an operation's domain (bad axis, empty input, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

// Filesystem failure.
class IoError : public Error {
 public:
  using Error::Error;
};

// A file was read but its contents are not a valid instance of the format.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Bad configuration key/value or command-line usage.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Exit codes: 0 success, 1 usage, 2 I/O, 3 numeric failure.
int exit_code(const std::exception& e) noexcept;

}  // namespace symot
