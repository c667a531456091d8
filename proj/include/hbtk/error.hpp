#pragma once

#include <stdexcept>
#include <string>

namespace hbtk {

/// Base class for all errors raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on an argument was violated (bad sizes, out-of-range parameters).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A matrix that had to be factored was numerically singular.
class SingularMatrix : public Error {
 public:
  using Error::Error;
};

/// A nonlinear solve or continuation run failed to produce a usable result.
class SolverFailure : public Error {
 public:
  using Error::Error;
};

/// Input file could not be parsed or failed validation.
class ParseError : public Error {
 public:
  using Error::Error;
};

namespace detail {

inline void require(bool condition, const std::string& message) {
  if (!condition) throw InvalidArgument(message);
}

}  // namespace detail
}  // namespace hbtk
