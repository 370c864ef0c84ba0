#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tradelab {

enum class Errc {
  MalformedRow,
  InvariantViolation,
  EmptyInput,
  NetworkError,
  RateLimited,
  EmptyRange,
  TooShort,
  PeriodZero,
  RangeTooSmall,
  RangeTouchesWarmup,
  ColumnMismatch,
  WindowUnderflow,
  NonPositivePrice,
  SteppedAfterDone,
  DimensionMismatch,
  ShapeMismatch,
  EmptyBuffer,
  BufferTooSmall,
  EmptyDataset,
  DivergenceDetected,
  ZeroBegin,
  IoError,
  InvalidConfig,
};

std::string_view errc_name(Errc code) noexcept;

// Every failure raised by the library carries one of the codes above so
// callers (and the CLI exit-code mapping) can branch on kind, not message.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace tradelab
