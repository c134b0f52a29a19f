#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mrb {

enum class ErrorKind {
  DegenerateRange,
  FormatError,
  IoError,
  UnsupportedKind,
  IndivisibleDims,
  InvalidPattern,
  ScheduleMismatch,
  VolumeTooSmall,
  CoverageGap,
  MissingSlice,
  WindowTooLarge,
  DimensionMismatch,
  DomainError,
  DegenerateInput,
  NoConvergence,
  ManifestError,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::DegenerateRange: return "DegenerateRange";
    case ErrorKind::FormatError: return "FormatError";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::UnsupportedKind: return "UnsupportedKind";
    case ErrorKind::IndivisibleDims: return "IndivisibleDims";
    case ErrorKind::InvalidPattern: return "InvalidPattern";
    case ErrorKind::ScheduleMismatch: return "ScheduleMismatch";
    case ErrorKind::VolumeTooSmall: return "VolumeTooSmall";
    case ErrorKind::CoverageGap: return "CoverageGap";
    case ErrorKind::MissingSlice: return "MissingSlice";
    case ErrorKind::WindowTooLarge: return "WindowTooLarge";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::DomainError: return "DomainError";
    case ErrorKind::DegenerateInput: return "DegenerateInput";
    case ErrorKind::NoConvergence: return "NoConvergence";
    case ErrorKind::ManifestError: return "ManifestError";
  }
  return "Unknown";
}

// Every module reports failures through this one exception type; callers
// dispatch on kind() rather than on a class hierarchy.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace mrb
