#pragma once

#include <stdexcept>
#include <string>

namespace svpc {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Spatial dimension outside {2, 3}.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Invalid model or training parameter.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the mathematical domain of a function.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Malformed lattice, dataset, or run specification.
class SpecError : public Error {
 public:
  using Error::Error;
};

/// Tensor or vector sizes that do not match an architecture.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// LP solver failure that is not plain infeasibility.
class SolverError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file. Carries the 1-based line and column of the fault.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line, std::size_t column)
      : Error(what + " (line " + std::to_string(line) + ", column " +
              std::to_string(column) + ")"),
        line_(line),
        column_(column) {}

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

}  // namespace svpc
