#pragma once

#include <stdexcept>
#include <string>

namespace vmad {

// Every failure in the toolkit maps to one of these codes so callers
// (and tests) can match on the condition instead of parsing messages.
enum class ErrorCode {
  // ingestion
  MissingFile,
  ParseError,
  ReferentialIntegrityError,
  UnknownFrame,
  DuplicateEntry,
  ScoreOutOfRange,
  UnsupportedImage,
  IoError,
  // fusion
  EmptySequence,
  ThresholdOutOfRange,
  LengthMismatch,
  AllZeroWeights,
  MissingTrack,
  // quality
  BoxOutOfBounds,
  DegenerateBox,
  InvalidStatistic,
  // metrics
  EmptySet,
  DegenerateCurve,
  // svr
  DimensionMismatch,
  NonConvergence,
  DegenerateInput,
  TooFewAttempts,
  // synth / cli
  InvalidConfig,
  InvalidArgument,
};

inline const char* error_code_name(ErrorCode c) {
  switch (c) {
    case ErrorCode::MissingFile: return "MissingFile";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::ReferentialIntegrityError: return "ReferentialIntegrityError";
    case ErrorCode::UnknownFrame: return "UnknownFrame";
    case ErrorCode::DuplicateEntry: return "DuplicateEntry";
    case ErrorCode::ScoreOutOfRange: return "ScoreOutOfRange";
    case ErrorCode::UnsupportedImage: return "UnsupportedImage";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::EmptySequence: return "EmptySequence";
    case ErrorCode::ThresholdOutOfRange: return "ThresholdOutOfRange";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::AllZeroWeights: return "AllZeroWeights";
    case ErrorCode::MissingTrack: return "MissingTrack";
    case ErrorCode::BoxOutOfBounds: return "BoxOutOfBounds";
    case ErrorCode::DegenerateBox: return "DegenerateBox";
    case ErrorCode::InvalidStatistic: return "InvalidStatistic";
    case ErrorCode::EmptySet: return "EmptySet";
    case ErrorCode::DegenerateCurve: return "DegenerateCurve";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NonConvergence: return "NonConvergence";
    case ErrorCode::DegenerateInput: return "DegenerateInput";
    case ErrorCode::TooFewAttempts: return "TooFewAttempts";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "UnknownError";
}

class VmadError : public std::runtime_error {
 public:
  VmadError(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw VmadError(code, message);
}

}  // namespace vmad
