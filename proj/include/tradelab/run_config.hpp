#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "tradelab/env.hpp"
#include "tradelab/features.hpp"
#include "tradelab/gail.hpp"
#include "tradelab/ppo.hpp"
#include "tradelab/sac.hpp"

namespace tradelab {

struct MarketConfig {
  std::string symbol = "ETHUSDT";
  std::string interval = "4h";
  // Exactly one source: a kline CSV, or a UTC date range to fetch.
  std::string csv;
  std::string start;  // YYYY-MM-DD
  std::string end;
  std::string host = "api.binance.com";
};

struct RunConfig {
  MarketConfig market;
  double split = 0.95;
  FeatureConfig features;  // features.window is the observation window
  EnvConfig env;
  std::string algo = "ppo";
  PpoConfig ppo;
  SacConfig sac;
  GailConfig gail;
  // Expert checkpoint for GAIL; empty means train (or reuse) a PPO expert.
  std::string expert_checkpoint;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Missing keys keep their defaults; unknown keys are rejected.
RunConfig run_config_from_json(const nlohmann::json& j);
nlohmann::json run_config_to_json(const RunConfig& config);
RunConfig load_run_config(const std::filesystem::path& path);

/// Milliseconds since the epoch at 00:00 UTC of a YYYY-MM-DD date.
std::int64_t parse_utc_date_ms(const std::string& date);

}  // namespace tradelab
