#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mbsc {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller broke a documented precondition (shape, range, orthonormality...).
class ContractViolation : public Error {
 public:
  using Error::Error;
};

/// Numerical rank fell below what the operation needs.
class DegenerateRankError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class EmptyDatasetError : public Error {
 public:
  using Error::Error;
};

class ZeroDistanceError : public Error {
 public:
  using Error::Error;
};

class IsolatedVertexError : public Error {
 public:
  IsolatedVertexError(std::size_t index, double degree)
      : Error("vertex " + std::to_string(index) + " is isolated (degree " +
              std::to_string(degree) + "); try a larger sigma"),
        index_(index) {}

  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

/// Retraction failed because the step destroyed the rank of W.
class StepFailure : public Error {
 public:
  using Error::Error;
};

/// Landmark affinity block in the Nystrom scheme is too low-rank.
class DegenerateLandmarkError : public Error {
 public:
  using Error::Error;
};

class DuplicateCentroidError : public Error {
 public:
  using Error::Error;
};

/// Refused because the requested work exceeds a configured guard.
class GuardExceeded : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace mbsc
