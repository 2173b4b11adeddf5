#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rna {

enum class ErrorKind {
  WindowTooSmall,
  DimensionMismatch,
  SingularSystem,
  NumericalFailure,
  DegenerateSum,
  OrderingViolation,
  FormatError,
  IoError,
  InvalidConfig,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::WindowTooSmall: return "WindowTooSmall";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::SingularSystem: return "SingularSystem";
    case ErrorKind::NumericalFailure: return "NumericalFailure";
    case ErrorKind::DegenerateSum: return "DegenerateSum";
    case ErrorKind::OrderingViolation: return "OrderingViolation";
    case ErrorKind::FormatError: return "FormatError";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the kinds above so
/// callers (the CLI in particular) can map it to a stable exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace rna
