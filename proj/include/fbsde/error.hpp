#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fbsde {

enum class ErrorCode {
  InvalidArgument,
  NegativeEntry,
  NonSquare,
  CapacityExceeded,
  TimeOutOfRange,
  StateCountMismatch,
  AliveSetOutOfRange,
  LevelNotBuilt,
  NotOnOrOutsideBoundary,
  DimensionUnsupported,
  StabilityViolation,
  BracketNotFound,
  StateSpaceExceeded,
  MaxIterExceeded,
  ShapeMismatch,
  FieldNotBuilt,
  BumpTooLargeForGrid,
  NoRoot,
  NoConvergence,
  ParseError,
  ValidationError,
  IoError,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::NegativeEntry: return "NegativeEntry";
    case ErrorCode::NonSquare: return "NonSquare";
    case ErrorCode::CapacityExceeded: return "CapacityExceeded";
    case ErrorCode::TimeOutOfRange: return "TimeOutOfRange";
    case ErrorCode::StateCountMismatch: return "StateCountMismatch";
    case ErrorCode::AliveSetOutOfRange: return "AliveSetOutOfRange";
    case ErrorCode::LevelNotBuilt: return "LevelNotBuilt";
    case ErrorCode::NotOnOrOutsideBoundary: return "NotOnOrOutsideBoundary";
    case ErrorCode::DimensionUnsupported: return "DimensionUnsupported";
    case ErrorCode::StabilityViolation: return "StabilityViolation";
    case ErrorCode::BracketNotFound: return "BracketNotFound";
    case ErrorCode::StateSpaceExceeded: return "StateSpaceExceeded";
    case ErrorCode::MaxIterExceeded: return "MaxIterExceeded";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::FieldNotBuilt: return "FieldNotBuilt";
    case ErrorCode::BumpTooLargeForGrid: return "BumpTooLargeForGrid";
    case ErrorCode::NoRoot: return "NoRoot";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::ValidationError: return "ValidationError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

/// Single exception type for the library; `code()` carries the failure class.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) fail(code, message);
}

}  // namespace fbsde
