#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "tradelab/market_data.hpp"

namespace tradelab {

/// Per-bar indicator values aligned with the source series. Entries before
/// `warmup_len` are undefined and hold NaN; every later entry is finite.
struct IndicatorSeries {
  std::vector<double> values;
  std::size_t warmup_len = 0;

  std::size_t size() const noexcept { return values.size(); }
  bool defined(std::size_t i) const noexcept { return i >= warmup_len && i < values.size(); }
  double operator[](std::size_t i) const { return values[i]; }
};

inline constexpr double kUndefined = std::numeric_limits<double>::quiet_NaN();

IndicatorSeries sma(std::span<const double> values, std::size_t period);
IndicatorSeries ema(std::span<const double> values, std::size_t period);

/// Wilder running average: seeded with the mean of `values[first .. first+period)`,
/// then s[i] = (s[i-1] * (period - 1) + x[i]) / period.
IndicatorSeries wilder_smooth(std::span<const double> values, std::size_t period, std::size_t first = 0);

std::vector<double> typical_price(const KlineSeries& series);

/// Commodity channel index; a zero mean deviation yields 0.
IndicatorSeries cci(const KlineSeries& series, std::size_t period);

/// Relative strength index with Wilder smoothing. Zero average loss gives 100,
/// zero average gain gives 0, and a flat window (both zero) gives 50.
IndicatorSeries rsi(const KlineSeries& series, std::size_t period);

/// True range; bar 0 has no previous close and uses high - low.
std::vector<double> true_range(const KlineSeries& series);
IndicatorSeries atr(const KlineSeries& series, std::size_t period);

struct DmiResult {
  IndicatorSeries di_plus;
  IndicatorSeries di_minus;
  IndicatorSeries dx;
};

DmiResult dmi(const KlineSeries& series, std::size_t period);

/// EMA(close, 12) - EMA(close, 26).
IndicatorSeries macd(const KlineSeries& series);

struct BollingerResult {
  IndicatorSeries mid;
  IndicatorSeries upper;
  IndicatorSeries lower;
};

/// Bands over typical price with population standard deviation.
BollingerResult bollinger(const KlineSeries& series, std::size_t n = 20, double m = 2.0);

}  // namespace tradelab
