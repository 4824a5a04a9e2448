#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mepi {

enum class ErrorCode {
  RankDeficient,
  ZeroColumn,
  AlreadySquare,
  NotOrthonormal,
  NonPositiveLambda,
  NotSpd,
  BadBlockStructure,
  UnsupportedFamily,
  NotCircular,
  TooFewSamples,
  DegenerateData,
  DuplicatePoints,
  SingularCovariance,
  NoConvergence,
  InvalidArgument,
  ParseError,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::ZeroColumn: return "ZeroColumn";
    case ErrorCode::AlreadySquare: return "AlreadySquare";
    case ErrorCode::NotOrthonormal: return "NotOrthonormal";
    case ErrorCode::NonPositiveLambda: return "NonPositiveLambda";
    case ErrorCode::NotSpd: return "NotSpd";
    case ErrorCode::BadBlockStructure: return "BadBlockStructure";
    case ErrorCode::UnsupportedFamily: return "UnsupportedFamily";
    case ErrorCode::NotCircular: return "NotCircular";
    case ErrorCode::TooFewSamples: return "TooFewSamples";
    case ErrorCode::DegenerateData: return "DegenerateData";
    case ErrorCode::DuplicatePoints: return "DuplicatePoints";
    case ErrorCode::SingularCovariance: return "SingularCovariance";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::ParseError: return "ParseError";
  }
  return "Unknown";
}

/// Exception carrying a machine-readable error code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace mepi
