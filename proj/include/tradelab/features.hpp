#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "tradelab/market_data.hpp"

namespace tradelab {

struct FeatureConfig {
  // Subset/order of the known column names; empty means the default 18.
  std::vector<std::string> columns;
  std::size_t cci_fast = 14;
  std::size_t cci_slow = 30;
  std::size_t rsi_fast = 14;
  std::size_t rsi_slow = 30;
  std::size_t dmi_period = 14;
  std::size_t atr_period = 14;
  std::size_t boll_n = 20;
  double boll_m = 2.0;
  std::size_t window = 60;
};

/// The 18 default columns, in order.
const std::vector<std::string>& default_feature_columns();

std::size_t observation_size(std::size_t window, std::size_t n_features);

/// Row-major matrix of per-bar features.
struct FeatureMatrix {
  std::vector<std::string> column_names;
  std::size_t n_rows = 0;
  std::vector<double> data;
  std::size_t valid_from = 0;

  std::size_t n_cols() const noexcept { return column_names.size(); }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * n_cols(), n_cols()}; }
  double at(std::size_t r, std::size_t c) const { return data[r * n_cols() + c]; }
  double& at(std::size_t r, std::size_t c) { return data[r * n_cols() + c]; }
  std::vector<double> column(std::size_t c) const;
};

FeatureMatrix build_feature_matrix(const KlineSeries& series, const FeatureConfig& config = {});

struct RowRange {
  std::size_t begin = 0;
  std::size_t end = 0;  // exclusive
  std::size_t size() const noexcept { return end > begin ? end - begin : 0; }
};

struct Normalizer {
  std::vector<std::string> column_names;
  std::vector<double> means;
  std::vector<double> stds;
  RowRange fitted_on;

  double inverse(std::size_t col, double z) const { return means[col] + stds[col] * z; }
};

/// Population mean/std per column over `rows` (training rows only).
Normalizer fit_normalizer(const FeatureMatrix& matrix, RowRange rows);

/// (x - mean) / std per column; std == 0 columns map to 0. Rows before
/// valid_from stay undefined.
FeatureMatrix normalize(const FeatureMatrix& matrix, const Normalizer& normalizer);

using Observation = std::vector<double>;

/// [cash / initial_balance, asset_units * price / initial_balance,
///  rows t-window+1 ..= t of the normalized matrix, row-major].
Observation assemble_observation(const FeatureMatrix& normalized, std::size_t t, double cash, double asset_units,
                                 double price, double initial_balance, std::size_t window);

std::string feature_matrix_to_csv(const FeatureMatrix& matrix);
void write_feature_matrix_csv(const FeatureMatrix& matrix, const std::filesystem::path& path);

}  // namespace tradelab
