#pragma once

#include <stdexcept>
#include <string>

namespace sqz {

// Failure categories. The CLI maps these onto its exit-code contract.
enum class ErrorKind {
  Domain,       // argument outside the mathematical domain of an operation
  Threshold,    // pump parameter at or above oscillation threshold
  Parse,        // malformed input file or option
  Alignment,    // traces do not share a frequency grid
  Range,        // interpolation outside the sampled range
  Empty,        // no valid points survive processing
  Inconsistent, // no physical solution for the given measurement
  Degenerate,   // least-squares problem is singular
  Numeric,      // finite-difference step underflow and similar
  InsufficientData,
  Io,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

const char* to_string(ErrorKind kind) noexcept;

}  // namespace sqz
