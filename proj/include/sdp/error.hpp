#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sdp {

enum class ErrorCode {
  // market data
  MalformedRow,
  NonMonotonicTimestamps,
  GapDetected,
  InvalidCandle,
  EmptyIntersection,
  PeriodMismatch,
  InsufficientHistory,
  IndexOutOfRange,
  WeightDimensionMismatch,
  NotOnSimplex,
  TooShort,
  HttpError,
  ParseError,
  RateLimited,
  // network / training
  DimensionMismatch,
  NonFiniteLogit,
  TraceMismatch,
  ShapeMismatch,
  NonPositiveGrowth,
  EmptyBatch,
  FrameTooShort,
  // metrics
  ZeroVariance,
  TooFewReturns,
  // quantizer
  AllZeroWeights,
  // tooling
  InsufficientSamples,
  InvalidArgument,
  ConfigError,
  FileNotFound,
  IoError,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Process exit status used by the CLI for each error kind. Never 0.
int exit_code(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

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

}  // namespace sdp
