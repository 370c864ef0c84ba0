#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

#include "tradelab/market_data.hpp"

namespace tradelab::testing {

inline constexpr std::int64_t kT0 = 1500000000000LL - (1500000000000LL % kFourHoursMs);

/// Random-walk OHLCV bars that satisfy every Kline invariant.
inline KlineSeries random_series(std::size_t n, std::uint64_t seed, double start = 100.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> step(0.0, 0.02);
  std::uniform_real_distribution<double> wick(0.0, 0.01);
  std::uniform_real_distribution<double> vol(0.0, 1000.0);
  KlineSeries s{"TEST-USDT", kFourHoursMs, {}};
  double close = start;
  for (std::size_t i = 0; i < n; ++i) {
    const double open = close;
    close = open * std::exp(step(rng));
    const double high = std::max(open, close) * (1.0 + wick(rng));
    const double low = std::min(open, close) * (1.0 - wick(rng));
    s.bars.push_back(Kline{kT0 + static_cast<std::int64_t>(i) * kFourHoursMs, open, high, low, close, vol(rng)});
  }
  return s;
}

inline KlineSeries constant_series(std::size_t n, double price = 50.0) {
  KlineSeries s{"FLAT-USDT", kFourHoursMs, {}};
  for (std::size_t i = 0; i < n; ++i) {
    s.bars.push_back(Kline{kT0 + static_cast<std::int64_t>(i) * kFourHoursMs, price, price, price, price, 10.0});
  }
  return s;
}

/// close_t = mid * (1 + amplitude * sin(2 pi t / period)); open is the
/// previous close and the wicks hug the body.
inline KlineSeries sine_series(std::size_t n, double period = 40.0, double amplitude = 0.10, double mid = 100.0) {
  KlineSeries s{"SINE-USDT", kFourHoursMs, {}};
  double prev = mid;
  for (std::size_t i = 0; i < n; ++i) {
    const double close = mid * (1.0 + amplitude * std::sin(2.0 * std::numbers::pi * static_cast<double>(i) / period));
    const double open = i == 0 ? close : prev;
    s.bars.push_back(Kline{kT0 + static_cast<std::int64_t>(i) * kFourHoursMs, open, std::max(open, close),
                           std::min(open, close), close, 1.0});
    prev = close;
  }
  return s;
}

/// Applies price -> scale * price + shift to every OHLC field.
inline KlineSeries transformed(KlineSeries s, double scale, double shift) {
  for (auto& b : s.bars) {
    b.open = scale * b.open + shift;
    b.high = scale * b.high + shift;
    b.low = scale * b.low + shift;
    b.close = scale * b.close + shift;
  }
  return s;
}

inline KlineSeries truncated(const KlineSeries& s, std::size_t keep) {
  KlineSeries out{s.symbol, s.interval_ms, {}};
  out.bars.assign(s.bars.begin(), s.bars.begin() + static_cast<std::ptrdiff_t>(keep));
  return out;
}

}  // namespace tradelab::testing
