#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "tradelab/env.hpp"
#include "tradelab/features.hpp"
#include "tradelab/market_data.hpp"

namespace tradelab {

/// A series turned into aligned features, prices and the train/test cut.
/// Training episodes cover [train_first, train_last]; the test episode
/// covers [test_first, test_last] with observation windows that may reach
/// back into earlier rows.
struct PreparedData {
  KlineSeries series;
  FeatureMatrix features;
  Normalizer normalizer;
  std::shared_ptr<const FeatureMatrix> normalized;
  std::vector<double> prices;
  std::vector<std::int64_t> timestamps;
  std::size_t split = 0;
  std::size_t train_first = 0;
  std::size_t train_last = 0;
  std::size_t test_first = 0;
  std::size_t test_last = 0;
};

/// Builds features, cuts at floor(n * train_fraction) and fits the
/// normalizer on training rows, unless `normalizer` is supplied.
PreparedData prepare_data(const KlineSeries& series, const FeatureConfig& features, std::size_t window,
                          double train_fraction, std::optional<Normalizer> normalizer = std::nullopt);

TradingEnv make_train_env(const PreparedData& data, const EnvConfig& config);
TradingEnv make_test_env(const PreparedData& data, const EnvConfig& config);

}  // namespace tradelab
