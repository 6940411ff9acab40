#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace eigenprism {

enum class ErrorCode {
  InvalidArgument,
  ConstantColumn,
  NotPositiveDefinite,
  DimensionError,
  DimensionMismatch,
  EmptySplit,
  SingularSystem,
  DegenerateDual,
  InvalidAlpha,
  DegenerateBootstrap,
  ZeroResponse,
  InvalidGamma,
  NormalizationError,
  InvalidCorrelation,
  ParseError,
  TrialFailures,
};

constexpr std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::ConstantColumn: return "ConstantColumn";
    case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorCode::DimensionError: return "DimensionError";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::EmptySplit: return "EmptySplit";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::DegenerateDual: return "DegenerateDual";
    case ErrorCode::InvalidAlpha: return "InvalidAlpha";
    case ErrorCode::DegenerateBootstrap: return "DegenerateBootstrap";
    case ErrorCode::ZeroResponse: return "ZeroResponse";
    case ErrorCode::InvalidGamma: return "InvalidGamma";
    case ErrorCode::NormalizationError: return "NormalizationError";
    case ErrorCode::InvalidCorrelation: return "InvalidCorrelation";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::TrialFailures: return "TrialFailures";
  }
  return "Unknown";
}

/// Library error carrying a machine-readable category.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

namespace detail {

inline void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw Error(ErrorCode::InvalidAlpha, "alpha must lie in (0,1), got " + std::to_string(alpha));
  }
}

}  // namespace detail
}  // namespace eigenprism
