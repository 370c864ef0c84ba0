#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tradelab/features.hpp"

namespace tradelab {

struct EnvConfig {
  double initial_balance = 10000.0;
  // Base-asset units traded per unit of action. Unset means
  // initial_balance / price at the episode's first bar.
  std::optional<double> max_buy_amount;
  double fee_rate = 0.0075;
  double reward_scale = 1e-4;
  double violation_penalty = -0.01;
  std::size_t window = 60;

  void validate() const;
};

struct EnvState {
  std::size_t t = 0;
  double cash = 0.0;
  double asset = 0.0;
  std::size_t trade_count = 0;
  double total_cost = 0.0;
  double last_gross_value = 0.0;
};

struct TradeInfo {
  double executed_units = 0.0;  // signed: + bought, - sold
  double fee_paid = 0.0;
  bool clamped = false;
};

struct StepResult {
  Observation observation;
  double reward = 0.0;
  bool done = false;
  TradeInfo info;
};

double gross_value(const EnvState& state, double price);

/// Clips `action` to [-1, 1] and trades max_buy_amount * action units at
/// `price`, clamped to what cash (fees included) or holdings allow.
std::pair<EnvState, TradeInfo> execute_trade(const EnvState& state, double action, double price,
                                             double max_buy_amount, const EnvConfig& config);

struct TraceRow {
  std::size_t t = 0;
  double price = 0.0;
  double action = 0.0;
  double executed_units = 0.0;
  double fee = 0.0;
  double cash = 0.0;
  double asset = 0.0;
  double gross_value = 0.0;
  double reward = 0.0;
};

/// Episodic single-asset market over bars [first_t, last_t]. Trades fill at
/// the close of the current bar; the episode ends when t reaches last_t.
class TradingEnv {
 public:
  TradingEnv(EnvConfig config, std::shared_ptr<const FeatureMatrix> normalized, std::vector<double> prices,
             std::size_t first_t, std::size_t last_t);

  Observation reset();
  StepResult step(double action);

  /// Sells the whole position at the current bar. Only valid once done.
  TradeInfo liquidate();

  const EnvState& state() const noexcept { return state_; }
  const EnvConfig& config() const noexcept { return config_; }
  bool done() const noexcept { return done_; }
  std::size_t first_t() const noexcept { return first_t_; }
  std::size_t last_t() const noexcept { return last_t_; }
  std::size_t episode_length() const noexcept { return last_t_ - first_t_; }
  std::size_t observation_dim() const noexcept;
  double price_at(std::size_t t) const { return prices_.at(t); }
  double max_buy_amount() const noexcept { return max_buy_; }
  Observation observe() const;
  const std::vector<TraceRow>& trace() const noexcept { return trace_; }

 private:
  EnvConfig config_;
  std::shared_ptr<const FeatureMatrix> features_;
  std::vector<double> prices_;
  std::size_t first_t_;
  std::size_t last_t_;
  double max_buy_;
  EnvState state_;
  bool done_ = false;
  std::vector<TraceRow> trace_;
};

std::string trace_to_csv(const std::vector<TraceRow>& rows);
void write_trace_csv(const std::vector<TraceRow>& rows, const std::filesystem::path& path);

}  // namespace tradelab
