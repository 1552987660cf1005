#include "sdp/error.hpp"

namespace sdp {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::MalformedRow: return "MalformedRow";
    case ErrorCode::NonMonotonicTimestamps: return "NonMonotonicTimestamps";
    case ErrorCode::GapDetected: return "GapDetected";
    case ErrorCode::InvalidCandle: return "InvalidCandle";
    case ErrorCode::EmptyIntersection: return "EmptyIntersection";
    case ErrorCode::PeriodMismatch: return "PeriodMismatch";
    case ErrorCode::InsufficientHistory: return "InsufficientHistory";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::WeightDimensionMismatch: return "WeightDimensionMismatch";
    case ErrorCode::NotOnSimplex: return "NotOnSimplex";
    case ErrorCode::TooShort: return "TooShort";
    case ErrorCode::HttpError: return "HttpError";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::RateLimited: return "RateLimited";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NonFiniteLogit: return "NonFiniteLogit";
    case ErrorCode::TraceMismatch: return "TraceMismatch";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NonPositiveGrowth: return "NonPositiveGrowth";
    case ErrorCode::EmptyBatch: return "EmptyBatch";
    case ErrorCode::FrameTooShort: return "FrameTooShort";
    case ErrorCode::ZeroVariance: return "ZeroVariance";
    case ErrorCode::TooFewReturns: return "TooFewReturns";
    case ErrorCode::AllZeroWeights: return "AllZeroWeights";
    case ErrorCode::InsufficientSamples: return "InsufficientSamples";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::FileNotFound: return "FileNotFound";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

int exit_code(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument:
    case ErrorCode::ConfigError: return 2;
    case ErrorCode::FileNotFound: return 3;
    case ErrorCode::IoError: return 4;
    case ErrorCode::HttpError: return 10;
    case ErrorCode::RateLimited: return 11;
    case ErrorCode::ParseError: return 12;
    case ErrorCode::MalformedRow:
    case ErrorCode::NonMonotonicTimestamps:
    case ErrorCode::GapDetected:
    case ErrorCode::InvalidCandle: return 13;
    case ErrorCode::EmptyIntersection:
    case ErrorCode::PeriodMismatch:
    case ErrorCode::InsufficientHistory:
    case ErrorCode::TooShort:
    case ErrorCode::FrameTooShort: return 14;
    case ErrorCode::AllZeroWeights: return 20;
    case ErrorCode::InsufficientSamples: return 21;
    default: return 1;
  }
}

}  // namespace sdp
