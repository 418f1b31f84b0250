#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pmrep {

enum class ErrorKind {
  NonMonotoneComposite,
  UnboundedPhi,
  InvalidArgument,
  ResolventBracketFailure,
  NegativeRatio,
  GridMismatch,
  ZeroMass,
  NonPositiveEpsilon,
  NoConvergence,
  SelectionViolation,
  ClockInversionFailure,
  ConfigError,
  ScenarioUnknown,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::NonMonotoneComposite: return "NonMonotoneComposite";
    case ErrorKind::UnboundedPhi: return "UnboundedPhi";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::ResolventBracketFailure: return "ResolventBracketFailure";
    case ErrorKind::NegativeRatio: return "NegativeRatio";
    case ErrorKind::GridMismatch: return "GridMismatch";
    case ErrorKind::ZeroMass: return "ZeroMass";
    case ErrorKind::NonPositiveEpsilon: return "NonPositiveEpsilon";
    case ErrorKind::NoConvergence: return "NoConvergence";
    case ErrorKind::SelectionViolation: return "SelectionViolation";
    case ErrorKind::ClockInversionFailure: return "ClockInversionFailure";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::ScenarioUnknown: return "ScenarioUnknown";
  }
  return "Unknown";
}

/// Every failure raised by the library carries a machine-readable kind so the
/// CLI can map it onto exit codes and manifest error records.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

inline void require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) fail(kind, message);
}

}  // namespace pmrep
