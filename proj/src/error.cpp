#include "tradelab/error.hpp"

namespace tradelab {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::MalformedRow: return "MalformedRow";
    case Errc::InvariantViolation: return "InvariantViolation";
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::NetworkError: return "NetworkError";
    case Errc::RateLimited: return "RateLimited";
    case Errc::EmptyRange: return "EmptyRange";
    case Errc::TooShort: return "TooShort";
    case Errc::PeriodZero: return "PeriodZero";
    case Errc::RangeTooSmall: return "RangeTooSmall";
    case Errc::RangeTouchesWarmup: return "RangeTouchesWarmup";
    case Errc::ColumnMismatch: return "ColumnMismatch";
    case Errc::WindowUnderflow: return "WindowUnderflow";
    case Errc::NonPositivePrice: return "NonPositivePrice";
    case Errc::SteppedAfterDone: return "SteppedAfterDone";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::EmptyBuffer: return "EmptyBuffer";
    case Errc::BufferTooSmall: return "BufferTooSmall";
    case Errc::EmptyDataset: return "EmptyDataset";
    case Errc::DivergenceDetected: return "DivergenceDetected";
    case Errc::ZeroBegin: return "ZeroBegin";
    case Errc::IoError: return "IoError";
    case Errc::InvalidConfig: return "InvalidConfig";
  }
  return "Unknown";
}

}  // namespace tradelab
