#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace tradelab {

inline constexpr std::int64_t kFourHoursMs = 4LL * 60 * 60 * 1000;

struct Kline {
  std::int64_t open_time = 0;  // unix epoch ms
  double open = 0.0;
  double high = 0.0;
  double low = 0.0;
  double close = 0.0;
  double volume = 0.0;
  // Set on bars synthesized by the gap policy.
  bool filled = false;
};

struct KlineSeries {
  std::string symbol;
  std::int64_t interval_ms = kFourHoursMs;
  std::vector<Kline> bars;

  std::size_t size() const noexcept { return bars.size(); }
  bool empty() const noexcept { return bars.empty(); }
  std::vector<double> closes() const;
  std::size_t filled_count() const;
};

// Throws InvariantViolation if a bar breaks the OHLCV constraints.
void validate_kline(const Kline& bar);

// Rows are string cells: [open_time, open, high, low, close, volume, ...].
// Extra trailing cells (exchange arrays carry 12) are ignored.
using KlineRow = std::vector<std::string>;

/// Parses, validates, sorts and gap-fills raw rows into a contiguous series.
/// Duplicate open times are rejected as InvariantViolation.
KlineSeries parse_klines(const std::vector<KlineRow>& rows, std::string symbol = {},
                         std::int64_t interval_ms = kFourHoursMs);

/// Exchange wire format: array of arrays, numbers or decimal strings.
KlineSeries parse_klines_json(const nlohmann::json& payload, std::string symbol = {},
                              std::int64_t interval_ms = kFourHoursMs);

std::string klines_to_csv(const KlineSeries& series);
KlineSeries klines_from_csv(const std::string& text, std::string symbol = {},
                            std::int64_t interval_ms = kFourHoursMs);
void write_klines_csv(const KlineSeries& series, const std::filesystem::path& path);
KlineSeries read_klines_csv(const std::filesystem::path& path, std::string symbol = {},
                            std::int64_t interval_ms = kFourHoursMs);

/// Chronological split; the first floor(n * train_fraction) bars train.
std::pair<KlineSeries, KlineSeries> split_train_test(const KlineSeries& series,
                                                     double train_fraction);
std::size_t split_index(std::size_t n, double train_fraction);

/// "1m", "15m", "4h", "1d", "1w" -> milliseconds.
std::int64_t interval_to_ms(const std::string& interval);

struct HttpResponse {
  int status = 0;
  std::string body;
  // Seconds; negative when the server did not send Retry-After.
  double retry_after = -1.0;
};

using QueryParams = std::map<std::string, std::string>;
using HttpGet = std::function<HttpResponse(const std::string& path, const QueryParams& params)>;

struct FetchOptions {
  int limit = 1000;
  int max_retries = 5;
  std::chrono::milliseconds initial_backoff{500};
  std::chrono::milliseconds max_backoff{30000};
};

// Paginated client for GET /api/v3/klines. Transport and sleeping are
// injected so replay tests never touch the network or the wall clock.
class KlineFetcher {
 public:
  using Sleeper = std::function<void(std::chrono::milliseconds)>;

  KlineFetcher(HttpGet transport, FetchOptions options = {}, Sleeper sleeper = {});

  KlineSeries fetch(const std::string& symbol, const std::string& interval,
                    std::int64_t start_time, std::int64_t end_time);

  std::size_t requests_issued() const noexcept { return requests_; }

 private:
  HttpResponse get_with_retry(const QueryParams& params);

  HttpGet transport_;
  FetchOptions options_;
  Sleeper sleeper_;
  std::size_t requests_ = 0;
};

/// HTTPS transport against a live exchange host (default api.binance.com).
HttpGet make_https_transport(const std::string& host = "api.binance.com");

}  // namespace tradelab
