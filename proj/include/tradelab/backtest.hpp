#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "tradelab/env.hpp"
#include "tradelab/neural.hpp"

namespace tradelab {

struct BacktestReport {
  double begin_value = 0.0;
  double end_value = 0.0;
  double total_cost = 0.0;
  std::size_t total_trades = 0;
  std::string start_date;  // YYYY-MM-DD (UTC)
  std::string end_date;
  std::int64_t span_days = 0;
  double profit_ratio = 0.0;
};

enum class Marker { Buy, Sell, Hold };

std::string_view marker_name(Marker m) noexcept;
Marker marker_from_units(double executed_units) noexcept;

struct AnnotatedPoint {
  std::int64_t timestamp = 0;
  double price = 0.0;
  double gross_value = 0.0;
  Marker marker = Marker::Hold;
  double executed_units = 0.0;
};

struct AnnotatedSeries {
  std::vector<AnnotatedPoint> points;
  std::size_t size() const noexcept { return points.size(); }
};

/// UTC calendar date of an epoch-millisecond timestamp.
std::string utc_date(std::int64_t epoch_ms);
std::int64_t days_between(const std::string& start_date, const std::string& end_date);

/// Builds a report from the five table fields; profit_ratio is derived.
BacktestReport make_report(double begin_value, double end_value, double total_cost, std::size_t total_trades,
                           std::string start_date, std::string end_date);

/// Steps the frozen policy's mean action through every bar of `test_env`,
/// then sells any remaining position at the last bar. `timestamps` is
/// indexed by bar like the environment's price series.
std::pair<BacktestReport, AnnotatedSeries> run_backtest(const GaussianPolicy& policy, TradingEnv& test_env,
                                                        std::span<const std::int64_t> timestamps);

struct ProfitMetrics {
  double profit_ratio = 0.0;
  double net_profit = 0.0;
  double cost_share = 0.0;
};

ProfitMetrics evaluate_profit_metrics(const BacktestReport& report);

/// The five labelled rows, tab separated.
std::string render_report_table(const BacktestReport& report);
nlohmann::json report_to_json(const BacktestReport& report);
BacktestReport report_from_json(const nlohmann::json& j);
std::string report_to_csv(const BacktestReport& report);

std::string annotated_series_to_csv(const AnnotatedSeries& series);
AnnotatedSeries annotated_series_from_csv(const std::string& text);
void export_annotated_series(const AnnotatedSeries& series, const std::filesystem::path& path);
AnnotatedSeries import_annotated_series(const std::filesystem::path& path);

}  // namespace tradelab
