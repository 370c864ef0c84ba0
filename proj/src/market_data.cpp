#include "tradelab/market_data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

#include "tradelab/error.hpp"
#include "tradelab/format.hpp"

namespace tradelab {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

double parse_number(std::string_view cell, std::size_t row, const char* field) {
  cell = trim(cell);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (cell.empty() || ec != std::errc{} || ptr != cell.data() + cell.size() || !std::isfinite(value)) {
    throw Error(Errc::MalformedRow, "row " + std::to_string(row) + ": field '" + field +
                                        "' is not numeric: '" + std::string(cell) + "'");
  }
  return value;
}

std::int64_t parse_timestamp(std::string_view cell, std::size_t row) {
  cell = trim(cell);
  std::int64_t value = 0;
  auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (cell.empty() || ec != std::errc{} || ptr != cell.data() + cell.size()) {
    throw Error(Errc::MalformedRow,
                "row " + std::to_string(row) + ": open_time is not an integer: '" + std::string(cell) + "'");
  }
  return value;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

}  // namespace

std::vector<double> KlineSeries::closes() const {
  std::vector<double> out;
  out.reserve(bars.size());
  for (const auto& b : bars) out.push_back(b.close);
  return out;
}

std::size_t KlineSeries::filled_count() const {
  return static_cast<std::size_t>(std::count_if(bars.begin(), bars.end(), [](const Kline& b) { return b.filled; }));
}

void validate_kline(const Kline& bar) {
  const auto where = " at open_time " + std::to_string(bar.open_time);
  if (!(bar.open > 0 && bar.high > 0 && bar.low > 0 && bar.close > 0)) {
    throw Error(Errc::InvariantViolation, "non-positive price" + where);
  }
  if (!(bar.volume >= 0)) throw Error(Errc::InvariantViolation, "negative volume" + where);
  if (bar.low > std::min(bar.open, bar.close) || std::max(bar.open, bar.close) > bar.high) {
    throw Error(Errc::InvariantViolation, "low <= min(open, close) <= max(open, close) <= high violated" + where);
  }
}

KlineSeries parse_klines(const std::vector<KlineRow>& rows, std::string symbol, std::int64_t interval_ms) {
  if (rows.empty()) throw Error(Errc::EmptyInput, "no kline rows");
  if (interval_ms <= 0) throw Error(Errc::InvalidConfig, "interval must be positive");

  std::vector<Kline> bars;
  bars.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& row = rows[i];
    if (row.size() < 6) {
      throw Error(Errc::MalformedRow, "row " + std::to_string(i) + ": expected 6 fields, got " +
                                          std::to_string(row.size()));
    }
    Kline bar;
    bar.open_time = parse_timestamp(row[0], i);
    bar.open = parse_number(row[1], i, "open");
    bar.high = parse_number(row[2], i, "high");
    bar.low = parse_number(row[3], i, "low");
    bar.close = parse_number(row[4], i, "close");
    bar.volume = parse_number(row[5], i, "volume");
    validate_kline(bar);
    bars.push_back(bar);
  }

  std::stable_sort(bars.begin(), bars.end(),
                   [](const Kline& a, const Kline& b) { return a.open_time < b.open_time; });

  KlineSeries series{std::move(symbol), interval_ms, {}};
  series.bars.reserve(bars.size());
  for (const auto& bar : bars) {
    if (!series.bars.empty()) {
      const auto& prev = series.bars.back();
      const auto delta = bar.open_time - prev.open_time;
      if (delta == 0) {
        throw Error(Errc::InvariantViolation, "duplicate open_time " + std::to_string(bar.open_time));
      }
      if (delta % interval_ms != 0) {
        throw Error(Errc::InvariantViolation,
                    "open_time " + std::to_string(bar.open_time) + " is off the interval grid");
      }
      // Forward-fill missing bars from the previous close.
      for (auto t = prev.open_time + interval_ms; t < bar.open_time; t += interval_ms) {
        const double c = series.bars.back().close;
        series.bars.push_back(Kline{t, c, c, c, c, 0.0, true});
      }
    }
    series.bars.push_back(bar);
  }
  return series;
}

KlineSeries parse_klines_json(const nlohmann::json& payload, std::string symbol, std::int64_t interval_ms) {
  if (!payload.is_array()) throw Error(Errc::MalformedRow, "klines payload is not an array");
  std::vector<KlineRow> rows;
  rows.reserve(payload.size());
  for (std::size_t i = 0; i < payload.size(); ++i) {
    const auto& entry = payload[i];
    if (!entry.is_array()) throw Error(Errc::MalformedRow, "row " + std::to_string(i) + " is not an array");
    KlineRow row;
    for (std::size_t k = 0; k < entry.size() && k < 6; ++k) {
      const auto& cell = entry[k];
      if (cell.is_string()) {
        row.push_back(cell.get<std::string>());
      } else if (cell.is_number_integer()) {
        row.push_back(std::to_string(cell.get<std::int64_t>()));
      } else if (cell.is_number()) {
        row.push_back(format_double(cell.get<double>()));
      } else {
        throw Error(Errc::MalformedRow, "row " + std::to_string(i) + ": field " + std::to_string(k) +
                                            " is neither number nor string");
      }
    }
    rows.push_back(std::move(row));
  }
  return parse_klines(rows, std::move(symbol), interval_ms);
}

std::string klines_to_csv(const KlineSeries& series) {
  std::string out = "open_time,open,high,low,close,volume\n";
  for (const auto& b : series.bars) {
    out += std::to_string(b.open_time);
    for (double v : {b.open, b.high, b.low, b.close, b.volume}) {
      out += ',';
      out += format_double(v);
    }
    out += '\n';
  }
  return out;
}

KlineSeries klines_from_csv(const std::string& text, std::string symbol, std::int64_t interval_ms) {
  std::istringstream in(text);
  std::string line;
  std::vector<KlineRow> rows;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!header_seen) {
      header_seen = true;
      if (line.rfind("open_time", 0) == 0) continue;
    }
    rows.push_back(split_csv_line(line));
  }
  return parse_klines(rows, std::move(symbol), interval_ms);
}

void write_klines_csv(const KlineSeries& series, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::IoError, "cannot open " + path.string() + " for writing");
  out << klines_to_csv(series);
  if (!out) throw Error(Errc::IoError, "write failed for " + path.string());
}

KlineSeries read_klines_csv(const std::filesystem::path& path, std::string symbol, std::int64_t interval_ms) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return klines_from_csv(buffer.str(), std::move(symbol), interval_ms);
}

std::size_t split_index(std::size_t n, double train_fraction) {
  return static_cast<std::size_t>(std::floor(static_cast<double>(n) * train_fraction));
}

std::pair<KlineSeries, KlineSeries> split_train_test(const KlineSeries& series, double train_fraction) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw Error(Errc::InvalidConfig, "train_fraction must lie in (0, 1)");
  }
  if (series.size() < 2) throw Error(Errc::TooShort, "need at least 2 bars to split");
  const auto cut = split_index(series.size(), train_fraction);
  KlineSeries train{series.symbol, series.interval_ms, {}};
  KlineSeries test{series.symbol, series.interval_ms, {}};
  train.bars.assign(series.bars.begin(), series.bars.begin() + static_cast<std::ptrdiff_t>(cut));
  test.bars.assign(series.bars.begin() + static_cast<std::ptrdiff_t>(cut), series.bars.end());
  return {std::move(train), std::move(test)};
}

std::int64_t interval_to_ms(const std::string& interval) {
  if (interval.size() < 2) throw Error(Errc::InvalidConfig, "bad interval '" + interval + "'");
  std::int64_t count = 0;
  const auto* first = interval.data();
  const auto* last = interval.data() + interval.size() - 1;
  auto [ptr, ec] = std::from_chars(first, last, count);
  if (ec != std::errc{} || ptr != last || count <= 0) {
    throw Error(Errc::InvalidConfig, "bad interval '" + interval + "'");
  }
  switch (interval.back()) {
    case 'm': return count * 60'000;
    case 'h': return count * 3'600'000;
    case 'd': return count * 86'400'000;
    case 'w': return count * 7 * 86'400'000;
    default: throw Error(Errc::InvalidConfig, "bad interval unit in '" + interval + "'");
  }
}

KlineFetcher::KlineFetcher(HttpGet transport, FetchOptions options, Sleeper sleeper)
    : transport_(std::move(transport)), options_(options), sleeper_(std::move(sleeper)) {
  if (!sleeper_) sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
  if (options_.limit <= 0 || options_.limit > 1000) {
    throw Error(Errc::InvalidConfig, "limit must lie in [1, 1000]");
  }
}

HttpResponse KlineFetcher::get_with_retry(const QueryParams& params) {
  auto backoff = options_.initial_backoff;
  for (int attempt = 0;; ++attempt) {
    ++requests_;
    HttpResponse response;
    bool transport_failed = false;
    try {
      response = transport_("/api/v3/klines", params);
    } catch (const std::exception&) {
      transport_failed = true;
    }
    const bool rate_limited = !transport_failed && (response.status == 429 || response.status == 418);
    const bool retryable = transport_failed || rate_limited || response.status >= 500 || response.status == 0;
    if (!retryable) return response;
    if (attempt >= options_.max_retries) {
      if (rate_limited) throw Error(Errc::RateLimited, "rate limited after " + std::to_string(attempt + 1) + " attempts");
      throw Error(Errc::NetworkError, "request failed after " + std::to_string(attempt + 1) + " attempts");
    }
    auto wait = backoff;
    if (rate_limited && response.retry_after >= 0) {
      wait = std::max(wait, std::chrono::milliseconds(static_cast<std::int64_t>(response.retry_after * 1000)));
    }
    sleeper_(std::min(wait, options_.max_backoff));
    backoff = std::min(backoff * 2, options_.max_backoff);
  }
}

KlineSeries KlineFetcher::fetch(const std::string& symbol, const std::string& interval,
                                std::int64_t start_time, std::int64_t end_time) {
  if (symbol.empty()) throw Error(Errc::InvalidConfig, "symbol is empty");
  if (start_time >= end_time) throw Error(Errc::EmptyRange, "start_time must precede end_time");
  const auto step = interval_to_ms(interval);

  std::vector<KlineRow> rows;
  auto cursor = start_time;
  while (cursor < end_time) {
    QueryParams params{{"symbol", symbol},
                       {"interval", interval},
                       {"startTime", std::to_string(cursor)},
                       {"endTime", std::to_string(end_time - 1)},
                       {"limit", std::to_string(options_.limit)}};
    const auto response = get_with_retry(params);
    if (response.status != 200) {
      throw Error(Errc::NetworkError, "HTTP " + std::to_string(response.status) + ": " + response.body);
    }
    nlohmann::json page;
    try {
      page = nlohmann::json::parse(response.body);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(Errc::MalformedRow, std::string("unparseable klines page: ") + e.what());
    }
    if (!page.is_array()) throw Error(Errc::MalformedRow, "klines page is not an array");
    if (page.empty()) break;

    std::int64_t last_open = cursor;
    for (const auto& entry : page) {
      if (!entry.is_array() || entry.size() < 6) throw Error(Errc::MalformedRow, "short kline entry");
      KlineRow row;
      for (std::size_t k = 0; k < 6; ++k) {
        const auto& cell = entry[k];
        if (cell.is_string()) {
          row.push_back(cell.get<std::string>());
        } else if (cell.is_number_integer()) {
          row.push_back(std::to_string(cell.get<std::int64_t>()));
        } else if (cell.is_number()) {
          row.push_back(format_double(cell.get<double>()));
        } else {
          throw Error(Errc::MalformedRow, "kline field is neither number nor string");
        }
      }
      last_open = std::max(last_open, entry[0].get<std::int64_t>());
      if (entry[0].get<std::int64_t>() >= start_time && entry[0].get<std::int64_t>() < end_time) {
        rows.push_back(std::move(row));
      }
    }
    if (static_cast<int>(page.size()) < options_.limit) break;
    cursor = last_open + step;
  }
  if (rows.empty()) throw Error(Errc::EmptyRange, "no bars in requested range");
  return parse_klines(rows, symbol, step);
}

}  // namespace tradelab
