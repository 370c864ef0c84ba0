#include "tradelab/backtest.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "tradelab/error.hpp"
#include "tradelab/format.hpp"

namespace tradelab {

std::string_view marker_name(Marker m) noexcept {
  switch (m) {
    case Marker::Buy: return "buy";
    case Marker::Sell: return "sell";
    case Marker::Hold: return "hold";
  }
  return "hold";
}

Marker marker_from_units(double executed_units) noexcept {
  if (executed_units > 0.0) return Marker::Buy;
  if (executed_units < 0.0) return Marker::Sell;
  return Marker::Hold;
}

namespace {

Marker parse_marker(const std::string& s) {
  if (s == "buy") return Marker::Buy;
  if (s == "sell") return Marker::Sell;
  if (s == "hold") return Marker::Hold;
  throw Error(Errc::MalformedRow, "unknown marker '" + s + "'");
}

std::chrono::sys_days parse_date(const std::string& s) {
  int y = 0;
  unsigned m = 0, d = 0;
  if (std::sscanf(s.c_str(), "%d-%u-%u", &y, &m, &d) != 3) throw Error(Errc::MalformedRow, "bad date '" + s + "'");
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
  if (!ymd.ok()) throw Error(Errc::MalformedRow, "bad date '" + s + "'");
  return std::chrono::sys_days{ymd};
}

}  // namespace

std::string utc_date(std::int64_t epoch_ms) {
  using namespace std::chrono;
  const auto days = floor<std::chrono::days>(sys_time<milliseconds>{milliseconds{epoch_ms}});
  const year_month_day ymd{days};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                static_cast<unsigned>(ymd.day()));
  return buf;
}

std::int64_t days_between(const std::string& start_date, const std::string& end_date) {
  return (parse_date(end_date) - parse_date(start_date)).count();
}

BacktestReport make_report(double begin_value, double end_value, double total_cost, std::size_t total_trades,
                           std::string start_date, std::string end_date) {
  BacktestReport r;
  r.begin_value = begin_value;
  r.end_value = end_value;
  r.total_cost = total_cost;
  r.total_trades = total_trades;
  r.span_days = days_between(start_date, end_date);
  r.start_date = std::move(start_date);
  r.end_date = std::move(end_date);
  r.profit_ratio = begin_value != 0.0 ? end_value / begin_value : 0.0;
  return r;
}

std::pair<BacktestReport, AnnotatedSeries> run_backtest(const GaussianPolicy& policy, TradingEnv& test_env,
                                                        std::span<const std::int64_t> timestamps) {
  if (timestamps.size() <= test_env.last_t()) {
    throw Error(Errc::DimensionMismatch, "timestamps do not cover the test episode");
  }
  AnnotatedSeries series;
  Observation obs = test_env.reset();
  const double begin = gross_value(test_env.state(), test_env.price_at(test_env.first_t()));
  while (!test_env.done()) {
    const auto t = test_env.state().t;
    const double action = policy.deterministic_action(obs)[0];
    auto step = test_env.step(action);
    const double price = test_env.price_at(t);
    const auto& st = test_env.state();
    series.points.push_back(AnnotatedPoint{timestamps[t], price, st.cash + st.asset * price,
                                           marker_from_units(step.info.executed_units), step.info.executed_units});
    obs = std::move(step.observation);
  }
  const auto final_t = test_env.state().t;
  const auto sold = test_env.liquidate();
  const auto& st = test_env.state();
  series.points.push_back(AnnotatedPoint{timestamps[final_t], test_env.price_at(final_t), st.cash,
                                         marker_from_units(sold.executed_units), sold.executed_units});

  auto report = make_report(begin, st.cash, st.total_cost, st.trade_count, utc_date(timestamps[test_env.first_t()]),
                            utc_date(timestamps[final_t]));
  return {report, std::move(series)};
}

ProfitMetrics evaluate_profit_metrics(const BacktestReport& report) {
  if (report.begin_value == 0.0) throw Error(Errc::ZeroBegin, "begin account value is zero");
  return ProfitMetrics{report.end_value / report.begin_value, report.end_value - report.begin_value,
                       report.total_cost / report.begin_value};
}

std::string render_report_table(const BacktestReport& r) {
  std::ostringstream out;
  out << "Begin Account Value\t" << format_double(r.begin_value) << '\n'
      << "End Account Value\t" << format_double(r.end_value) << '\n'
      << "Total Cost\t" << format_double(r.total_cost) << '\n'
      << "Total Trades\t" << r.total_trades << '\n'
      << "Start Date/End Date\t" << r.start_date << '/' << r.end_date << " (" << r.span_days << " Days)\n";
  return out.str();
}

nlohmann::json report_to_json(const BacktestReport& r) {
  return {{"begin_value", r.begin_value}, {"end_value", r.end_value},     {"total_cost", r.total_cost},
          {"total_trades", r.total_trades}, {"start_date", r.start_date}, {"end_date", r.end_date},
          {"span_days", r.span_days},     {"profit_ratio", r.profit_ratio}};
}

BacktestReport report_from_json(const nlohmann::json& j) {
  return make_report(j.at("begin_value").get<double>(), j.at("end_value").get<double>(),
                     j.at("total_cost").get<double>(), j.at("total_trades").get<std::size_t>(),
                     j.at("start_date").get<std::string>(), j.at("end_date").get<std::string>());
}

std::string report_to_csv(const BacktestReport& r) {
  return "begin_value,end_value,total_cost,total_trades,start_date,end_date,span_days,profit_ratio\n" +
         format_double(r.begin_value) + ',' + format_double(r.end_value) + ',' + format_double(r.total_cost) + ',' +
         std::to_string(r.total_trades) + ',' + r.start_date + ',' + r.end_date + ',' + std::to_string(r.span_days) +
         ',' + format_double(r.profit_ratio) + '\n';
}

std::string annotated_series_to_csv(const AnnotatedSeries& series) {
  std::string out = "timestamp,price,gross_value,marker,executed_units\n";
  for (const auto& p : series.points) {
    out += std::to_string(p.timestamp) + ',' + format_double(p.price) + ',' + format_double(p.gross_value) + ',' +
           std::string(marker_name(p.marker)) + ',' + format_double(p.executed_units) + '\n';
  }
  return out;
}

AnnotatedSeries annotated_series_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  AnnotatedSeries series;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (header) {
      header = false;
      continue;
    }
    std::istringstream row(line);
    std::string ts, price, gv, marker, units;
    if (!std::getline(row, ts, ',') || !std::getline(row, price, ',') || !std::getline(row, gv, ',') ||
        !std::getline(row, marker, ',') || !std::getline(row, units, ',')) {
      throw Error(Errc::MalformedRow, "annotated series row has fewer than 5 fields");
    }
    try {
      series.points.push_back(
          AnnotatedPoint{std::stoll(ts), std::stod(price), std::stod(gv), parse_marker(marker), std::stod(units)});
    } catch (const std::invalid_argument&) {
      throw Error(Errc::MalformedRow, "annotated series row is not numeric: " + line);
    }
  }
  return series;
}

void export_annotated_series(const AnnotatedSeries& series, const std::filesystem::path& path) {
  if (series.points.empty()) throw Error(Errc::EmptyInput, "annotated series is empty");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::IoError, "cannot open " + path.string() + " for writing");
  out << annotated_series_to_csv(series);
  if (!out) throw Error(Errc::IoError, "write failed for " + path.string());
}

AnnotatedSeries import_annotated_series(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return annotated_series_from_csv(buffer.str());
}

}  // namespace tradelab
