#pragma once

#include <stdexcept>
#include <string>

namespace geoflow {

enum class ErrorCode {
  InvalidConfig,
  NonPositiveAxis,
  InvalidDimension,
  DuplicateAxis,
  DegenerateForm,
  ConstraintViolation,
  ResamplingFailure,
  ZeroVelocity,
  PoleAtAxis,
  NonFiniteState,
  StepUnderflow,
  MaxStepsExceeded,
  NonMonotoneTime,
  NoConvergence,
  DegenerateChord,
};

inline const char* to_string(ErrorCode c) {
  switch (c) {
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::NonPositiveAxis: return "NonPositiveAxis";
    case ErrorCode::InvalidDimension: return "InvalidDimension";
    case ErrorCode::DuplicateAxis: return "DuplicateAxis";
    case ErrorCode::DegenerateForm: return "DegenerateForm";
    case ErrorCode::ConstraintViolation: return "ConstraintViolation";
    case ErrorCode::ResamplingFailure: return "ResamplingFailure";
    case ErrorCode::ZeroVelocity: return "ZeroVelocity";
    case ErrorCode::PoleAtAxis: return "PoleAtAxis";
    case ErrorCode::NonFiniteState: return "NonFiniteState";
    case ErrorCode::StepUnderflow: return "StepUnderflow";
    case ErrorCode::MaxStepsExceeded: return "MaxStepsExceeded";
    case ErrorCode::NonMonotoneTime: return "NonMonotoneTime";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::DegenerateChord: return "DegenerateChord";
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

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

}  // namespace geoflow
