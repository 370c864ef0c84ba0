#pragma once

// Brute-force re-evaluations of the indicator formulas. Each one takes a
// different route from src/indicators.cpp: EMA is expanded into its
// explicit weighted sum, Wilder smoothing uses the running-total form
// S_t = S_{t-1} - S_{t-1}/P + x_t, and Bollinger variance uses E[x^2] - E[x]^2.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "tradelab/market_data.hpp"

namespace tradelab::oracle {

inline constexpr double nan = std::numeric_limits<double>::quiet_NaN();

inline std::vector<double> tp_of(const KlineSeries& s) {
  std::vector<double> tp;
  for (const auto& b : s.bars) tp.push_back((b.high + b.low + b.close) / 3.0);
  return tp;
}

inline std::vector<double> sma(const std::vector<double>& x, std::size_t p) {
  std::vector<double> out(x.size(), nan);
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (i + 1 < p) continue;
    double s = 0;
    for (std::size_t k = 0; k < p; ++k) s += x[i - k];
    out[i] = s / static_cast<double>(p);
  }
  return out;
}

inline std::vector<double> ema(const std::vector<double>& x, std::size_t p) {
  std::vector<double> out(x.size(), nan);
  if (x.size() < p) return out;
  const double a = 2.0 / (static_cast<double>(p) + 1.0);
  double seed = 0;
  for (std::size_t k = 0; k < p; ++k) seed += x[k];
  seed /= static_cast<double>(p);
  for (std::size_t i = p - 1; i < x.size(); ++i) {
    const auto steps = static_cast<double>(i - (p - 1));
    double v = std::pow(1.0 - a, steps) * seed;
    for (std::size_t k = p; k <= i; ++k) v += a * std::pow(1.0 - a, static_cast<double>(i - k)) * x[k];
    out[i] = v;
  }
  return out;
}

/// Average form of the running-total smoother, seeded over x[first .. first+p).
inline std::vector<double> wilder(const std::vector<double>& x, std::size_t p, std::size_t first) {
  std::vector<double> out(x.size(), nan);
  const auto seed_at = first + p - 1;
  if (x.size() <= seed_at) return out;
  double total = 0;
  for (std::size_t k = first; k <= seed_at; ++k) total += x[k];
  out[seed_at] = total / static_cast<double>(p);
  for (std::size_t i = seed_at + 1; i < x.size(); ++i) {
    total = total - total / static_cast<double>(p) + x[i];
    out[i] = total / static_cast<double>(p);
  }
  return out;
}

inline std::vector<double> cci(const KlineSeries& s, std::size_t p) {
  const auto tp = tp_of(s);
  std::vector<double> out(tp.size(), nan);
  for (std::size_t i = p - 1; i < tp.size(); ++i) {
    double ma = 0;
    for (std::size_t k = i + 1 - p; k <= i; ++k) ma += tp[k];
    ma /= static_cast<double>(p);
    double md = 0;
    for (std::size_t k = i + 1 - p; k <= i; ++k) md += std::fabs(tp[k] - ma);
    md /= static_cast<double>(p);
    out[i] = md == 0 ? 0.0 : (tp[i] - ma) / (0.015 * md);
  }
  return out;
}

inline std::vector<double> rsi(const KlineSeries& s, std::size_t p) {
  const auto n = s.size();
  std::vector<double> gain(n, 0), loss(n, 0);
  for (std::size_t i = 1; i < n; ++i) {
    const double d = s.bars[i].close - s.bars[i - 1].close;
    if (d > 0) gain[i] = d;
    if (d < 0) loss[i] = -d;
  }
  const auto ag = wilder(gain, p, 1);
  const auto al = wilder(loss, p, 1);
  std::vector<double> out(n, nan);
  for (std::size_t i = p; i < n; ++i) {
    if (al[i] == 0) {
      out[i] = ag[i] == 0 ? 50.0 : 100.0;
    } else {
      out[i] = 100.0 - 100.0 / (1.0 + ag[i] / al[i]);
    }
  }
  return out;
}

inline std::vector<double> tr(const KlineSeries& s) {
  std::vector<double> out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto& b = s.bars[i];
    if (i == 0) {
      out.push_back(b.high - b.low);
    } else {
      const double pc = s.bars[i - 1].close;
      out.push_back(std::max({b.high - b.low, std::fabs(b.high - pc), std::fabs(b.low - pc)}));
    }
  }
  return out;
}

inline std::vector<double> atr(const KlineSeries& s, std::size_t p) { return wilder(tr(s), p, 0); }

struct Dmi {
  std::vector<double> plus, minus, dx;
};

inline Dmi dmi(const KlineSeries& s, std::size_t p) {
  const auto n = s.size();
  std::vector<double> pdm(n, 0), mdm(n, 0);
  for (std::size_t i = 1; i < n; ++i) {
    const double up = s.bars[i].high - s.bars[i - 1].high;
    const double dn = s.bars[i - 1].low - s.bars[i].low;
    if (up > dn && up > 0) pdm[i] = up;
    if (dn > up && dn > 0) mdm[i] = dn;
  }
  const auto sp = wilder(pdm, p, 1);
  const auto sm = wilder(mdm, p, 1);
  const auto a = atr(s, p);
  Dmi out{std::vector<double>(n, nan), std::vector<double>(n, nan), std::vector<double>(n, nan)};
  for (std::size_t i = p; i < n; ++i) {
    out.plus[i] = a[i] == 0 ? 0.0 : sp[i] / a[i] * 100.0;
    out.minus[i] = a[i] == 0 ? 0.0 : sm[i] / a[i] * 100.0;
    const double sum = out.plus[i] + out.minus[i];
    out.dx[i] = sum == 0 ? 0.0 : std::fabs(out.plus[i] - out.minus[i]) / sum * 100.0;
  }
  return out;
}

inline std::vector<double> macd(const KlineSeries& s) {
  const auto c = s.closes();
  const auto fast = ema(c, 12);
  const auto slow = ema(c, 26);
  std::vector<double> out(c.size(), nan);
  for (std::size_t i = 25; i < c.size(); ++i) out[i] = fast[i] - slow[i];
  return out;
}

struct Bands {
  std::vector<double> mid, upper, lower;
};

inline Bands bollinger(const KlineSeries& s, std::size_t n, double m) {
  const auto tp = tp_of(s);
  Bands out{std::vector<double>(tp.size(), nan), std::vector<double>(tp.size(), nan),
            std::vector<double>(tp.size(), nan)};
  for (std::size_t i = n - 1; i < tp.size(); ++i) {
    double sum = 0, sq = 0;
    for (std::size_t k = i + 1 - n; k <= i; ++k) {
      sum += tp[k];
      sq += tp[k] * tp[k];
    }
    const double mean = sum / static_cast<double>(n);
    const double var = std::max(0.0, sq / static_cast<double>(n) - mean * mean);
    out.upper[i] = mean + m * std::sqrt(var);
    out.lower[i] = mean - m * std::sqrt(var);
    out.mid[i] = (out.upper[i] + out.lower[i]) / 2.0;
  }
  return out;
}

/// Double loop over the TD residuals: A_t = sum_k (gamma lambda)^k delta_{t+k},
/// cut after the first terminal step.
inline std::vector<double> gae(const std::vector<double>& r, const std::vector<double>& v,
                               const std::vector<std::uint8_t>& done, double last_value, double gamma, double lambda) {
  const auto n = r.size();
  std::vector<double> delta(n);
  for (std::size_t t = 0; t < n; ++t) {
    const double next = t + 1 < n ? v[t + 1] : last_value;
    delta[t] = r[t] + gamma * next * (done[t] ? 0.0 : 1.0) - v[t];
  }
  std::vector<double> a(n, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    double w = 1.0;
    for (std::size_t k = t; k < n; ++k) {
      a[t] += w * delta[k];
      if (done[k]) break;
      w *= gamma * lambda;
    }
  }
  return a;
}

}  // namespace tradelab::oracle
