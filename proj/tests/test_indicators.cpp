#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>
#include <vector>

#include "oracles.hpp"
#include "support.hpp"
#include "tradelab/error.hpp"
#include "tradelab/indicators.hpp"

using namespace tradelab;

namespace {

void check_matches(const IndicatorSeries& got, const std::vector<double>& want, double tol = 1e-9) {
  REQUIRE(got.size() == want.size());
  for (std::size_t i = 0; i < want.size(); ++i) {
    if (std::isnan(want[i])) {
      CHECK_FALSE(got.defined(i));
      CHECK(std::isnan(got[i]));
    } else {
      REQUIRE(got.defined(i));
      CHECK(std::fabs(got[i] - want[i]) <= tol);
    }
  }
}

KlineSeries uptrend(std::size_t n) {
  KlineSeries s{"UP", kFourHoursMs, {}};
  for (std::size_t i = 0; i < n; ++i) {
    const double base = 100.0 + 2.0 * static_cast<double>(i);
    s.bars.push_back(Kline{testing::kT0 + static_cast<std::int64_t>(i) * kFourHoursMs, base, base + 1.5, base - 0.5,
                           base + 1.0, 1.0});
  }
  return s;
}

KlineSeries closes_only(const std::vector<double>& closes) {
  KlineSeries s{"C", kFourHoursMs, {}};
  for (std::size_t i = 0; i < closes.size(); ++i) {
    const double c = closes[i];
    s.bars.push_back(Kline{testing::kT0 + static_cast<std::int64_t>(i) * kFourHoursMs, c, c, c, c, 1.0});
  }
  return s;
}

Errc code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected a tradelab::Error");
  return Errc::IoError;
}

}  // namespace

TEST_CASE("sma examples") {
  const std::vector<double> x{1, 2, 3, 4};
  const auto s = sma(x, 2);
  CHECK(s.warmup_len == 1);
  CHECK(std::isnan(s[0]));
  CHECK(s[1] == 1.5);
  CHECK(s[2] == 2.5);
  CHECK(s[3] == 3.5);
  const std::vector<double> five{5, 5, 5};
  const auto c = sma(five, 3);
  CHECK(c.warmup_len == 2);
  CHECK(c[2] == 5.0);
  const std::vector<double> id{1, 2, 3};
  const auto same = sma(id, 1);
  CHECK(same.values == id);
  CHECK(code_of([&] { sma(x, 0); }) == Errc::PeriodZero);
}

TEST_CASE("ema examples") {
  const std::vector<double> flat(30, 7.25);
  const auto e = ema(flat, 9);
  for (std::size_t i = e.warmup_len; i < e.size(); ++i) CHECK(e[i] == doctest::Approx(7.25).epsilon(1e-15));
  const std::vector<double> x{1, 2, 3, 4, 5};
  CHECK(ema(x, 1).values == x);
  // seed 2 at index 2, alpha 0.5: 3, 4
  const auto h = ema(x, 3);
  CHECK(h.warmup_len == 2);
  CHECK(h[2] == 2.0);
  CHECK(h[3] == 3.0);
  CHECK(h[4] == 4.0);
  CHECK(code_of([&] { ema(x, 0); }) == Errc::PeriodZero);
}

TEST_CASE("cci examples") {
  const auto flat = testing::constant_series(40, 12.0);
  const auto c = cci(flat, 14);
  CHECK(c.warmup_len == 13);
  for (std::size_t i = 13; i < c.size(); ++i) CHECK(c[i] == 0.0);
  // 20-bar ramp
  std::vector<double> ramp;
  for (int i = 0; i < 20; ++i) ramp.push_back(10.0 + i);
  const auto r = closes_only(ramp);
  check_matches(cci(r, 14), oracle::cci(r, 14));
  // last bar sits on the window mean
  std::vector<double> sym{1, 3, 2};
  const auto z = cci(closes_only(sym), 3);
  CHECK(z[2] == 0.0);
}

TEST_CASE("rsi examples") {
  std::vector<double> up, down;
  for (int i = 0; i < 40; ++i) {
    up.push_back(10.0 + i);
    down.push_back(100.0 - i);
  }
  const auto ru = rsi(closes_only(up), 14);
  CHECK(ru.warmup_len == 14);
  for (std::size_t i = 14; i < ru.size(); ++i) CHECK(ru[i] == 100.0);
  const auto rd = rsi(closes_only(down), 14);
  for (std::size_t i = 14; i < rd.size(); ++i) CHECK(rd[i] == 0.0);
  std::vector<double> long_alt;
  for (int i = 0; i < 2000; ++i) long_alt.push_back(50.0 + (i % 2));
  const auto ra = rsi(closes_only(long_alt), 14);
  // settles into a symmetric two-cycle around 50
  const double hi = ra.values[1999], lo = ra.values[1998];
  CHECK((hi + lo) / 2.0 == doctest::Approx(50.0).epsilon(1e-9));
  CHECK(hi - 50.0 == doctest::Approx(50.0 / 27.0).epsilon(1e-9));
  const auto rf = rsi(testing::constant_series(30), 14);
  for (std::size_t i = 14; i < rf.size(); ++i) CHECK(rf[i] == 50.0);
  CHECK(code_of([] { rsi(testing::constant_series(14), 14); }) == Errc::TooShort);
  CHECK(code_of([] { rsi(testing::constant_series(20), 0); }) == Errc::PeriodZero);
}

TEST_CASE("atr examples") {
  const auto a = atr(testing::constant_series(30), 14);
  for (std::size_t i = a.warmup_len; i < a.size(); ++i) CHECK(a[i] == 0.0);
  KlineSeries one{"X", kFourHoursMs, {Kline{testing::kT0, 100, 105, 95, 101, 1}}};
  CHECK(true_range(one)[0] == 10.0);
  const auto r = testing::random_series(20, 99);
  check_matches(atr(r, 14), oracle::atr(r, 14));
}

TEST_CASE("dmi examples") {
  const auto flat = dmi(testing::constant_series(40), 14);
  for (std::size_t i = 14; i < 40; ++i) {
    CHECK(flat.di_plus[i] == 0.0);
    CHECK(flat.di_minus[i] == 0.0);
    CHECK(flat.dx[i] == 0.0);
  }
  const auto up = dmi(uptrend(40), 14);
  CHECK(up.dx.warmup_len == 14);
  for (std::size_t i = 14; i < 40; ++i) {
    CHECK(up.di_minus[i] == 0.0);
    CHECK(up.di_plus[i] > 0.0);
    CHECK(up.dx[i] == doctest::Approx(100.0));
  }
  const auto mixed = testing::random_series(30, 1234);
  const auto got = dmi(mixed, 14);
  const auto want = oracle::dmi(mixed, 14);
  check_matches(got.di_plus, want.plus);
  check_matches(got.di_minus, want.minus);
  check_matches(got.dx, want.dx);
  CHECK(code_of([] { dmi(testing::constant_series(14), 14); }) == Errc::TooShort);
}

TEST_CASE("macd examples") {
  const auto flat = macd(testing::constant_series(60, 33.0));
  CHECK(flat.warmup_len == 25);
  for (std::size_t i = 25; i < 60; ++i) CHECK(flat[i] == doctest::Approx(0.0).scale(33.0));
  const auto r = testing::random_series(60, 5);
  const auto m = macd(r);
  const auto c = r.closes();
  CHECK(m[25] == ema(c, 12)[25] - ema(c, 26)[25]);
  check_matches(m, oracle::macd(r));
  CHECK(code_of([] { macd(testing::constant_series(25)); }) == Errc::TooShort);
}

TEST_CASE("bollinger examples") {
  const auto flat = bollinger(testing::constant_series(30, 8.0));
  for (std::size_t i = 19; i < 30; ++i) {
    CHECK(flat.mid[i] == doctest::Approx(8.0));
    CHECK(flat.upper[i] == doctest::Approx(8.0));
    CHECK(flat.lower[i] == doctest::Approx(8.0));
  }
  const auto r = testing::random_series(25, 77);
  const auto zero = bollinger(r, 20, 0.0);
  for (std::size_t i = 19; i < 25; ++i) {
    CHECK(zero.upper[i] == zero.mid[i]);
    CHECK(zero.lower[i] == zero.mid[i]);
  }
  const auto got = bollinger(r, 20, 2.0);
  const auto want = oracle::bollinger(r, 20, 2.0);
  check_matches(got.mid, want.mid);
  check_matches(got.upper, want.upper);
  check_matches(got.lower, want.lower);
  CHECK(code_of([&] { bollinger(r, 0, 2.0); }) == Errc::PeriodZero);
}

TEST_CASE("every indicator agrees with the brute-force oracles") {
  for (std::uint64_t seed = 100; seed < 110; ++seed) {
    const auto s = testing::random_series(60, seed);
    const auto c = s.closes();
    check_matches(sma(c, 7), oracle::sma(c, 7));
    check_matches(ema(c, 12), oracle::ema(c, 12));
    check_matches(wilder_smooth(c, 14, 1), oracle::wilder(c, 14, 1));
    check_matches(cci(s, 14), oracle::cci(s, 14));
    check_matches(cci(s, 30), oracle::cci(s, 30));
    check_matches(rsi(s, 14), oracle::rsi(s, 14));
    check_matches(rsi(s, 30), oracle::rsi(s, 30));
    check_matches(atr(s, 14), oracle::atr(s, 14));
    const auto d = dmi(s, 14);
    const auto od = oracle::dmi(s, 14);
    check_matches(d.di_plus, od.plus);
    check_matches(d.di_minus, od.minus);
    check_matches(d.dx, od.dx);
    check_matches(macd(s), oracle::macd(s));
    const auto b = bollinger(s);
    const auto ob = oracle::bollinger(s, 20, 2.0);
    check_matches(b.mid, ob.mid);
    check_matches(b.upper, ob.upper);
    check_matches(b.lower, ob.lower);
  }
}

TEST_CASE("shift and scale behaviour") {
  for (std::uint64_t seed = 1; seed <= 25; ++seed) {
    const auto s = testing::random_series(80, seed);
    const double k = 17.5;
    const double lam = 3.0;
    const auto shifted = testing::transformed(s, 1.0, k);
    const auto scaled = testing::transformed(s, lam, 0.0);
    const auto r0 = rsi(s, 14), r1 = rsi(shifted, 14), r2 = rsi(scaled, 14);
    const auto a0 = atr(s, 14), a1 = atr(shifted, 14), a2 = atr(scaled, 14);
    const auto b0 = bollinger(s), b1 = bollinger(shifted), b2 = bollinger(scaled);
    const auto c0 = cci(s, 14), c2 = cci(scaled, 14);
    const auto d0 = dmi(s, 14), d2 = dmi(scaled, 14);
    const auto m0 = macd(s), m2 = macd(scaled);
    for (std::size_t i = 30; i < 80; ++i) {
      CHECK(r1[i] == doctest::Approx(r0[i]).epsilon(1e-9));
      CHECK(r2[i] == doctest::Approx(r0[i]).epsilon(1e-9));
      CHECK(a1[i] == doctest::Approx(a0[i]).epsilon(1e-9));
      CHECK(a2[i] == doctest::Approx(lam * a0[i]).epsilon(1e-9));
      CHECK(b1.mid[i] == doctest::Approx(b0.mid[i] + k).epsilon(1e-9));
      CHECK(b1.upper[i] - b1.lower[i] == doctest::Approx(b0.upper[i] - b0.lower[i]).epsilon(1e-6));
      CHECK(b2.upper[i] == doctest::Approx(lam * b0.upper[i]).epsilon(1e-9));
      CHECK(c2[i] == doctest::Approx(c0[i]).epsilon(1e-7));
      CHECK(d2.dx[i] == doctest::Approx(d0.dx[i]).epsilon(1e-9));
      CHECK(m2[i] == doctest::Approx(lam * m0[i]).scale(1.0).epsilon(1e-9));
    }
  }
}

TEST_CASE("bounded outputs and no look-ahead") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto s = testing::random_series(70, seed + 500);
    const auto r = rsi(s, 14);
    const auto d = dmi(s, 14);
    const auto b = bollinger(s);
    for (std::size_t i = 30; i < 70; ++i) {
      CHECK(r[i] >= 0.0);
      CHECK(r[i] <= 100.0);
      CHECK(d.dx[i] >= 0.0);
      CHECK(d.dx[i] <= 100.0);
      CHECK(b.lower[i] <= b.mid[i]);
      CHECK(b.mid[i] <= b.upper[i]);
    }
    const std::size_t cut = 35 + seed;
    const auto t = testing::truncated(s, cut + 1);
    CHECK(rsi(t, 14)[cut] == r[cut]);
    CHECK(dmi(t, 14).dx[cut] == d.dx[cut]);
    CHECK(bollinger(t).upper[cut] == b.upper[cut]);
    CHECK(macd(t)[cut] == macd(s)[cut]);
    CHECK(cci(t, 30)[cut] == cci(s, 30)[cut]);
    CHECK(atr(t, 14)[cut] == atr(s, 14)[cut]);
  }
}
