#include "tradelab/features.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "tradelab/error.hpp"
#include "tradelab/format.hpp"
#include "tradelab/indicators.hpp"

namespace tradelab {

const std::vector<std::string>& default_feature_columns() {
  static const std::vector<std::string> columns{
      "open",   "high",      "low",        "close",      "volume", "return",
      "cci14",  "cci30",     "rsi14",      "rsi30",      "di_plus14", "di_minus14",
      "dx14",   "atr14",     "macd",       "boll_mid",   "boll_upper", "boll_lower"};
  return columns;
}

std::size_t observation_size(std::size_t window, std::size_t n_features) { return 2 + window * n_features; }

std::vector<double> FeatureMatrix::column(std::size_t c) const {
  std::vector<double> out(n_rows);
  for (std::size_t r = 0; r < n_rows; ++r) out[r] = at(r, c);
  return out;
}

namespace {

// Column names carry their default period; a config that changes the period
// keeps the stable name so checkpoints stay comparable across runs.
IndicatorSeries compute_column(const std::string& name, const KlineSeries& s, const FeatureConfig& cfg) {
  const auto n = s.size();
  auto raw = [&](auto field) {
    IndicatorSeries out{std::vector<double>(n), 0};
    for (std::size_t i = 0; i < n; ++i) out.values[i] = field(s.bars[i]);
    return out;
  };
  if (name == "open") return raw([](const Kline& b) { return b.open; });
  if (name == "high") return raw([](const Kline& b) { return b.high; });
  if (name == "low") return raw([](const Kline& b) { return b.low; });
  if (name == "close") return raw([](const Kline& b) { return b.close; });
  if (name == "volume") return raw([](const Kline& b) { return b.volume; });
  if (name == "return") {
    IndicatorSeries out{std::vector<double>(n, 0.0), 0};
    for (std::size_t i = 1; i < n; ++i) out.values[i] = s.bars[i].close / s.bars[i - 1].close - 1.0;
    return out;
  }
  if (name == "cci14") return cci(s, cfg.cci_fast);
  if (name == "cci30") return cci(s, cfg.cci_slow);
  if (name == "rsi14") return rsi(s, cfg.rsi_fast);
  if (name == "rsi30") return rsi(s, cfg.rsi_slow);
  if (name == "di_plus14") return dmi(s, cfg.dmi_period).di_plus;
  if (name == "di_minus14") return dmi(s, cfg.dmi_period).di_minus;
  if (name == "dx14") return dmi(s, cfg.dmi_period).dx;
  if (name == "atr14") return atr(s, cfg.atr_period);
  if (name == "macd") return macd(s);
  if (name == "boll_mid") return bollinger(s, cfg.boll_n, cfg.boll_m).mid;
  if (name == "boll_upper") return bollinger(s, cfg.boll_n, cfg.boll_m).upper;
  if (name == "boll_lower") return bollinger(s, cfg.boll_n, cfg.boll_m).lower;
  throw Error(Errc::InvalidConfig, "unknown feature column '" + name + "'");
}

}  // namespace

FeatureMatrix build_feature_matrix(const KlineSeries& series, const FeatureConfig& config) {
  const auto& names = config.columns.empty() ? default_feature_columns() : config.columns;
  if (series.empty()) throw Error(Errc::TooShort, "empty series");

  FeatureMatrix m;
  m.column_names = names;
  m.n_rows = series.size();
  m.data.assign(m.n_rows * names.size(), kUndefined);

  for (std::size_t c = 0; c < names.size(); ++c) {
    const auto col = compute_column(names[c], series, config);
    m.valid_from = std::max(m.valid_from, col.warmup_len);
    for (std::size_t r = 0; r < m.n_rows; ++r) m.at(r, c) = col.values[r];
  }
  if (m.valid_from >= m.n_rows) {
    throw Error(Errc::TooShort, "series of " + std::to_string(m.n_rows) + " bars never clears the " +
                                    std::to_string(m.valid_from) + "-bar warm-up");
  }
  for (std::size_t r = 0; r < m.valid_from; ++r) {
    for (std::size_t c = 0; c < m.n_cols(); ++c) m.at(r, c) = kUndefined;
  }
  return m;
}

Normalizer fit_normalizer(const FeatureMatrix& matrix, RowRange rows) {
  if (rows.begin < matrix.valid_from) {
    throw Error(Errc::RangeTouchesWarmup, "fit range starts at " + std::to_string(rows.begin) +
                                              " before valid_from " + std::to_string(matrix.valid_from));
  }
  if (rows.end > matrix.n_rows || rows.size() < 2) {
    throw Error(Errc::RangeTooSmall, "fit range must hold >= 2 rows inside the matrix");
  }
  const auto f = matrix.n_cols();
  Normalizer norm{matrix.column_names, std::vector<double>(f, 0.0), std::vector<double>(f, 0.0), rows};
  const double count = static_cast<double>(rows.size());
  for (std::size_t c = 0; c < f; ++c) {
    double sum = 0.0;
    for (std::size_t r = rows.begin; r < rows.end; ++r) sum += matrix.at(r, c);
    const double mean = sum / count;
    double sq = 0.0;
    for (std::size_t r = rows.begin; r < rows.end; ++r) {
      const double d = matrix.at(r, c) - mean;
      sq += d * d;
    }
    norm.means[c] = mean;
    norm.stds[c] = std::sqrt(sq / count);
  }
  return norm;
}

FeatureMatrix normalize(const FeatureMatrix& matrix, const Normalizer& normalizer) {
  if (matrix.column_names != normalizer.column_names) {
    throw Error(Errc::ColumnMismatch, "matrix columns differ from the normalizer's");
  }
  FeatureMatrix out = matrix;
  for (std::size_t r = matrix.valid_from; r < matrix.n_rows; ++r) {
    for (std::size_t c = 0; c < matrix.n_cols(); ++c) {
      const double sd = normalizer.stds[c];
      out.at(r, c) = sd > 0.0 ? (matrix.at(r, c) - normalizer.means[c]) / sd : 0.0;
    }
  }
  return out;
}

Observation assemble_observation(const FeatureMatrix& normalized, std::size_t t, double cash, double asset_units,
                                 double price, double initial_balance, std::size_t window) {
  if (window == 0) throw Error(Errc::InvalidConfig, "window must be >= 1");
  if (t >= normalized.n_rows) throw Error(Errc::WindowUnderflow, "t beyond the matrix");
  if (t + 1 < normalized.valid_from + window) {
    throw Error(Errc::WindowUnderflow, "t = " + std::to_string(t) + " has no full " + std::to_string(window) +
                                           "-row window after valid_from " +
                                           std::to_string(normalized.valid_from));
  }
  const auto f = normalized.n_cols();
  Observation obs;
  obs.reserve(observation_size(window, f));
  obs.push_back(cash / initial_balance);
  obs.push_back(asset_units * price / initial_balance);
  const auto first = t + 1 - window;
  obs.insert(obs.end(), normalized.data.begin() + static_cast<std::ptrdiff_t>(first * f),
             normalized.data.begin() + static_cast<std::ptrdiff_t>((t + 1) * f));
  return obs;
}

std::string feature_matrix_to_csv(const FeatureMatrix& matrix) {
  std::string out;
  for (std::size_t c = 0; c < matrix.n_cols(); ++c) {
    if (c) out += ',';
    out += matrix.column_names[c];
  }
  out += '\n';
  for (std::size_t r = 0; r < matrix.n_rows; ++r) {
    for (std::size_t c = 0; c < matrix.n_cols(); ++c) {
      if (c) out += ',';
      const double v = matrix.at(r, c);
      if (!std::isnan(v)) out += format_double(v);
    }
    out += '\n';
  }
  return out;
}

void write_feature_matrix_csv(const FeatureMatrix& matrix, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::IoError, "cannot open " + path.string() + " for writing");
  out << feature_matrix_to_csv(matrix);
}

}  // namespace tradelab
