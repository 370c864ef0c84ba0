#include "tradelab/pipeline.hpp"

#include "tradelab/error.hpp"

namespace tradelab {

PreparedData prepare_data(const KlineSeries& series, const FeatureConfig& features, std::size_t window,
                          double train_fraction, std::optional<Normalizer> normalizer) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw Error(Errc::InvalidConfig, "train_fraction must lie in (0, 1)");
  }
  if (window == 0) throw Error(Errc::InvalidConfig, "window must be >= 1");
  PreparedData d;
  d.series = series;
  d.features = build_feature_matrix(series, features);
  d.prices = series.closes();
  d.timestamps.reserve(series.size());
  for (const auto& b : series.bars) d.timestamps.push_back(b.open_time);

  d.split = split_index(series.size(), train_fraction);
  d.train_first = d.features.valid_from + window - 1;
  if (d.split < d.train_first + 2) {
    throw Error(Errc::WindowUnderflow, "training split of " + std::to_string(d.split) + " bars cannot fit the " +
                                           std::to_string(window) + "-bar window after the " +
                                           std::to_string(d.features.valid_from) + "-bar warm-up");
  }
  d.train_last = d.split - 1;
  d.test_first = d.split;
  d.test_last = series.size() - 1;
  if (d.test_last <= d.test_first) throw Error(Errc::WindowUnderflow, "test split needs at least 2 bars");

  d.normalizer = normalizer ? std::move(*normalizer) : fit_normalizer(d.features, RowRange{d.features.valid_from, d.split});
  d.normalized = std::make_shared<const FeatureMatrix>(normalize(d.features, d.normalizer));
  return d;
}

TradingEnv make_train_env(const PreparedData& data, const EnvConfig& config) {
  return TradingEnv(config, data.normalized, data.prices, data.train_first, data.train_last);
}

TradingEnv make_test_env(const PreparedData& data, const EnvConfig& config) {
  return TradingEnv(config, data.normalized, data.prices, data.test_first, data.test_last);
}

}  // namespace tradelab
