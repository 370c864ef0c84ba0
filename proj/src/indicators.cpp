#include "tradelab/indicators.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "tradelab/error.hpp"

namespace tradelab {

namespace {

void require_period(std::size_t period) {
  if (period == 0) throw Error(Errc::PeriodZero, "indicator period must be >= 1");
}

IndicatorSeries undefined_series(std::size_t n, std::size_t warmup) {
  return IndicatorSeries{std::vector<double>(n, kUndefined), std::min(warmup, n)};
}

double window_mean(std::span<const double> values, std::size_t end_inclusive, std::size_t period) {
  double sum = 0.0;
  for (std::size_t k = end_inclusive + 1 - period; k <= end_inclusive; ++k) sum += values[k];
  return sum / static_cast<double>(period);
}

}  // namespace

IndicatorSeries sma(std::span<const double> values, std::size_t period) {
  require_period(period);
  auto out = undefined_series(values.size(), period - 1);
  for (std::size_t i = period - 1; i < values.size(); ++i) out.values[i] = window_mean(values, i, period);
  return out;
}

IndicatorSeries ema(std::span<const double> values, std::size_t period) {
  require_period(period);
  auto out = undefined_series(values.size(), period - 1);
  if (values.size() < period) return out;
  const double alpha = 2.0 / (static_cast<double>(period) + 1.0);
  double prev = window_mean(values, period - 1, period);
  out.values[period - 1] = prev;
  for (std::size_t i = period; i < values.size(); ++i) {
    prev = alpha * values[i] + (1.0 - alpha) * prev;
    out.values[i] = prev;
  }
  return out;
}

IndicatorSeries wilder_smooth(std::span<const double> values, std::size_t period, std::size_t first) {
  require_period(period);
  const std::size_t seed_at = first + period - 1;
  auto out = undefined_series(values.size(), seed_at);
  if (values.size() <= seed_at) return out;
  double prev = window_mean(values, seed_at, period);
  out.values[seed_at] = prev;
  const double p = static_cast<double>(period);
  for (std::size_t i = seed_at + 1; i < values.size(); ++i) {
    prev = (prev * (p - 1.0) + values[i]) / p;
    out.values[i] = prev;
  }
  return out;
}

std::vector<double> typical_price(const KlineSeries& series) {
  std::vector<double> tp;
  tp.reserve(series.size());
  for (const auto& b : series.bars) tp.push_back((b.high + b.low + b.close) / 3.0);
  return tp;
}

IndicatorSeries cci(const KlineSeries& series, std::size_t period) {
  require_period(period);
  const auto tp = typical_price(series);
  const auto ma = sma(tp, period);
  auto out = undefined_series(tp.size(), period - 1);
  for (std::size_t i = period - 1; i < tp.size(); ++i) {
    double dev = 0.0;
    for (std::size_t k = i + 1 - period; k <= i; ++k) dev += std::abs(tp[k] - ma.values[i]);
    dev /= static_cast<double>(period);
    out.values[i] = dev == 0.0 ? 0.0 : (tp[i] - ma.values[i]) / (0.015 * dev);
  }
  return out;
}

IndicatorSeries rsi(const KlineSeries& series, std::size_t period) {
  require_period(period);
  const auto n = series.size();
  if (n <= period) {
    throw Error(Errc::TooShort, "rsi(" + std::to_string(period) + ") needs more than " +
                                    std::to_string(period) + " bars, got " + std::to_string(n));
  }
  std::vector<double> gains(n, 0.0), losses(n, 0.0);
  for (std::size_t i = 1; i < n; ++i) {
    const double change = series.bars[i].close - series.bars[i - 1].close;
    gains[i] = std::max(change, 0.0);
    losses[i] = std::max(-change, 0.0);
  }
  const auto avg_gain = wilder_smooth(gains, period, 1);
  const auto avg_loss = wilder_smooth(losses, period, 1);
  auto out = undefined_series(n, period);
  for (std::size_t i = period; i < n; ++i) {
    const double g = avg_gain.values[i];
    const double l = avg_loss.values[i];
    if (l == 0.0) {
      out.values[i] = g == 0.0 ? 50.0 : 100.0;
    } else {
      out.values[i] = 100.0 - 100.0 / (1.0 + g / l);
    }
  }
  return out;
}

std::vector<double> true_range(const KlineSeries& series) {
  std::vector<double> tr;
  tr.reserve(series.size());
  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& b = series.bars[i];
    double range = b.high - b.low;
    if (i > 0) {
      const double prev_close = series.bars[i - 1].close;
      range = std::max({range, std::abs(b.high - prev_close), std::abs(b.low - prev_close)});
    }
    tr.push_back(range);
  }
  return tr;
}

IndicatorSeries atr(const KlineSeries& series, std::size_t period) {
  require_period(period);
  return wilder_smooth(true_range(series), period, 0);
}

DmiResult dmi(const KlineSeries& series, std::size_t period) {
  require_period(period);
  const auto n = series.size();
  if (n <= period) {
    throw Error(Errc::TooShort, "dmi(" + std::to_string(period) + ") needs more than " +
                                    std::to_string(period) + " bars, got " + std::to_string(n));
  }
  std::vector<double> plus_dm(n, 0.0), minus_dm(n, 0.0);
  for (std::size_t i = 1; i < n; ++i) {
    const double up = series.bars[i].high - series.bars[i - 1].high;
    const double down = series.bars[i - 1].low - series.bars[i].low;
    plus_dm[i] = (up > down && up > 0.0) ? up : 0.0;
    minus_dm[i] = (down > up && down > 0.0) ? down : 0.0;
  }
  const auto smooth_plus = wilder_smooth(plus_dm, period, 1);
  const auto smooth_minus = wilder_smooth(minus_dm, period, 1);
  const auto range = atr(series, period);

  DmiResult out{undefined_series(n, period), undefined_series(n, period), undefined_series(n, period)};
  for (std::size_t i = period; i < n; ++i) {
    const double a = range.values[i];
    const double dip = a == 0.0 ? 0.0 : 100.0 * smooth_plus.values[i] / a;
    const double dim = a == 0.0 ? 0.0 : 100.0 * smooth_minus.values[i] / a;
    out.di_plus.values[i] = dip;
    out.di_minus.values[i] = dim;
    const double sum = dip + dim;
    out.dx.values[i] = sum == 0.0 ? 0.0 : 100.0 * std::abs(dip - dim) / sum;
  }
  return out;
}

IndicatorSeries macd(const KlineSeries& series) {
  if (series.size() < 26) {
    throw Error(Errc::TooShort, "macd needs at least 26 bars, got " + std::to_string(series.size()));
  }
  const auto close = series.closes();
  const auto fast = ema(close, 12);
  const auto slow = ema(close, 26);
  auto out = undefined_series(close.size(), 25);
  for (std::size_t i = 25; i < close.size(); ++i) out.values[i] = fast.values[i] - slow.values[i];
  return out;
}

BollingerResult bollinger(const KlineSeries& series, std::size_t n, double m) {
  require_period(n);
  if (!(m >= 0.0)) throw Error(Errc::InvalidConfig, "bollinger multiplier must be >= 0");
  const auto tp = typical_price(series);
  const auto mid = sma(tp, n);
  BollingerResult out{mid, undefined_series(tp.size(), n - 1), undefined_series(tp.size(), n - 1)};
  for (std::size_t i = n - 1; i < tp.size(); ++i) {
    double var = 0.0;
    for (std::size_t k = i + 1 - n; k <= i; ++k) {
      const double d = tp[k] - mid.values[i];
      var += d * d;
    }
    const double sigma = std::sqrt(var / static_cast<double>(n));
    out.upper.values[i] = mid.values[i] + m * sigma;
    out.lower.values[i] = mid.values[i] - m * sigma;
  }
  return out;
}

}  // namespace tradelab
