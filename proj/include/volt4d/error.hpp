#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace volt4d {

enum class ErrorKind {
  InvalidShape,
  ShapeMismatch,
  InvalidAxis,
  OutOfBounds,
  State,
  Config,
  Io,
  Checksum,
  Version,
  Corrupt,
  UndefinedCorrelation,
  Numerical,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidShape: return "invalid-shape";
    case ErrorKind::ShapeMismatch: return "shape-mismatch";
    case ErrorKind::InvalidAxis: return "invalid-axis";
    case ErrorKind::OutOfBounds: return "out-of-bounds";
    case ErrorKind::State: return "state";
    case ErrorKind::Config: return "config";
    case ErrorKind::Io: return "io";
    case ErrorKind::Checksum: return "checksum";
    case ErrorKind::Version: return "version";
    case ErrorKind::Corrupt: return "corrupt";
    case ErrorKind::UndefinedCorrelation: return "undefined-correlation";
    case ErrorKind::Numerical: return "numerical";
  }
  return "unknown";
}

/// Every failure raised by the library carries one of the kinds above so
/// callers (and the CLI's machine-readable error line) can branch on it.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

}  // namespace volt4d
