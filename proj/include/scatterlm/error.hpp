#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace scatterlm {

/// Broad failure classes. The CLI prints the class name as the first token of
/// its single-line error report, so these names are part of the interface.
enum class ErrorKind {
  Parse,
  Validation,
  Range,
  Numerical,
  Convergence,
  Compatibility,
  Io,
  Usage,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Parse: return "parse_error";
    case ErrorKind::Validation: return "validation_error";
    case ErrorKind::Range: return "range_error";
    case ErrorKind::Numerical: return "numerical_error";
    case ErrorKind::Convergence: return "convergence_error";
    case ErrorKind::Compatibility: return "compatibility_error";
    case ErrorKind::Io: return "io_error";
    case ErrorKind::Usage: return "usage_error";
  }
  return "error";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace scatterlm
