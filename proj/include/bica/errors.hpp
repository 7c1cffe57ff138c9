#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace bica {

// Common base so harness code can catch every library failure in one place.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shape mismatch between related objects (rows vs columns, vector lengths).
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Malformed textual input; carries the 1-based line where parsing stopped.
class ParseError : public Error {
 public:
  ParseError(const std::string& message, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + message), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Input exceeds a documented size bound (table would not fit, enumeration
// would not terminate in reasonable time).
class CapacityError : public Error {
 public:
  using Error::Error;
};

// A numeric or structural argument is outside its documented domain.
class ParameterError : public Error {
 public:
  using Error::Error;
};

// No solution exists under the stated constraints.
class InfeasibilityError : public Error {
 public:
  using Error::Error;
};

// The recursion hit a candidate whose probability cannot be recovered
// (conditioning mass vanished or a ratio denominator fell below tolerance).
// Carries the candidate's monitor bitmask.
class DegenerateSourceError : public Error {
 public:
  DegenerateSourceError(const std::string& message, std::uint32_t bitmask)
      : Error(message + " (candidate bitmask " + std::to_string(bitmask) + ")"),
        bitmask_(bitmask) {}
  std::uint32_t bitmask() const noexcept { return bitmask_; }

 private:
  std::uint32_t bitmask_;
};

// Monitor groups handed to assembly overlap or leave gaps.
class PartitionError : public Error {
 public:
  using Error::Error;
};

}  // namespace bica
