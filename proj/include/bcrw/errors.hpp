#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace bcrw {

enum class ErrorCode {
  NonCentered,
  DegenerateCovariance,
  StrictSubgroup,
  BadProbabilities,
  NotCritical,
  ZeroVariance,
  WindowTooSmall,
  MarginTooSmall,
  NoConvergence,
  StepOutsideSupport,
  OverlappingSets,
  RadiusTooSmall,
  BudgetExceeded,
  ShellTooLarge,
  EmptySet,
  InvalidArgument,
};

constexpr std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::NonCentered: return "NonCentered";
    case ErrorCode::DegenerateCovariance: return "DegenerateCovariance";
    case ErrorCode::StrictSubgroup: return "StrictSubgroup";
    case ErrorCode::BadProbabilities: return "BadProbabilities";
    case ErrorCode::NotCritical: return "NotCritical";
    case ErrorCode::ZeroVariance: return "ZeroVariance";
    case ErrorCode::WindowTooSmall: return "WindowTooSmall";
    case ErrorCode::MarginTooSmall: return "MarginTooSmall";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::StepOutsideSupport: return "StepOutsideSupport";
    case ErrorCode::OverlappingSets: return "OverlappingSets";
    case ErrorCode::RadiusTooSmall: return "RadiusTooSmall";
    case ErrorCode::BudgetExceeded: return "BudgetExceeded";
    case ErrorCode::ShellTooLarge: return "ShellTooLarge";
    case ErrorCode::EmptySet: return "EmptySet";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace bcrw
