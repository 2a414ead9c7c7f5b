#pragma once

#include <stdexcept>
#include <string>

namespace tsflow {

enum class ErrorCode {
  NonAdmissibleSchedule,
  NegativeSpacer,
  StageOverflow,
  UnknownStage,
  ShiftTooLarge,
  UnrefinableStage,
  NotMeanZero,
  NoStableCluster,
  IllConditioned,
  ArityMismatch,
  DivergentTail,
  InvalidArgument,
  InvalidConfig,
  IoFailure,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonAdmissibleSchedule: return "NonAdmissibleSchedule";
    case ErrorCode::NegativeSpacer: return "NegativeSpacer";
    case ErrorCode::StageOverflow: return "StageOverflow";
    case ErrorCode::UnknownStage: return "UnknownStage";
    case ErrorCode::ShiftTooLarge: return "ShiftTooLarge";
    case ErrorCode::UnrefinableStage: return "UnrefinableStage";
    case ErrorCode::NotMeanZero: return "NotMeanZero";
    case ErrorCode::NoStableCluster: return "NoStableCluster";
    case ErrorCode::IllConditioned: return "IllConditioned";
    case ErrorCode::ArityMismatch: return "ArityMismatch";
    case ErrorCode::DivergentTail: return "DivergentTail";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::IoFailure: return "IoFailure";
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

}  // namespace tsflow
