#include "tradelab/env.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "tradelab/error.hpp"
#include "tradelab/format.hpp"

namespace tradelab {

void EnvConfig::validate() const {
  if (!(initial_balance > 0.0)) throw Error(Errc::InvalidConfig, "initial_balance must be > 0");
  if (max_buy_amount && !(*max_buy_amount > 0.0)) throw Error(Errc::InvalidConfig, "max_buy_amount must be > 0");
  if (!(fee_rate >= 0.0 && fee_rate < 1.0)) throw Error(Errc::InvalidConfig, "fee_rate must lie in [0, 1)");
  if (!(reward_scale > 0.0)) throw Error(Errc::InvalidConfig, "reward_scale must be > 0");
  if (!(violation_penalty <= 0.0)) throw Error(Errc::InvalidConfig, "violation_penalty must be <= 0");
  if (window == 0) throw Error(Errc::InvalidConfig, "window must be >= 1");
}

double gross_value(const EnvState& state, double price) { return state.cash + state.asset * price; }

std::pair<EnvState, TradeInfo> execute_trade(const EnvState& state, double action, double price,
                                             double max_buy_amount, const EnvConfig& config) {
  if (!(price > 0.0)) throw Error(Errc::NonPositivePrice, "trade price must be > 0");
  if (!std::isfinite(action)) throw Error(Errc::InvalidConfig, "action is not finite");
  action = std::clamp(action, -1.0, 1.0);

  EnvState next = state;
  TradeInfo info;
  const double desired = max_buy_amount * action;
  double executed = 0.0;
  if (desired > 0.0) {
    const double affordable = state.cash / (price * (1.0 + config.fee_rate));
    executed = std::min(desired, affordable);
    next.cash = std::max(0.0, state.cash - executed * price * (1.0 + config.fee_rate));
    next.asset = state.asset + executed;
    info.executed_units = executed;
  } else if (desired < 0.0) {
    executed = std::min(-desired, state.asset);
    next.asset = state.asset - executed;
    next.cash = state.cash + executed * price * (1.0 - config.fee_rate);
    info.executed_units = -executed;
  }
  info.fee_paid = executed * price * config.fee_rate;
  info.clamped = executed < std::abs(desired) - 1e-12;
  next.total_cost = state.total_cost + info.fee_paid;
  if (executed > 0.0) ++next.trade_count;
  return {next, info};
}

TradingEnv::TradingEnv(EnvConfig config, std::shared_ptr<const FeatureMatrix> normalized, std::vector<double> prices,
                       std::size_t first_t, std::size_t last_t)
    : config_(std::move(config)),
      features_(std::move(normalized)),
      prices_(std::move(prices)),
      first_t_(first_t),
      last_t_(last_t) {
  config_.validate();
  if (!features_) throw Error(Errc::InvalidConfig, "feature matrix is null");
  if (prices_.size() != features_->n_rows) {
    throw Error(Errc::DimensionMismatch, "price series and feature matrix differ in length");
  }
  if (first_t_ + 1 < features_->valid_from + config_.window) {
    throw Error(Errc::WindowUnderflow, "first bar " + std::to_string(first_t_) + " has no full " +
                                           std::to_string(config_.window) + "-bar window");
  }
  if (last_t_ <= first_t_ || last_t_ >= prices_.size()) {
    throw Error(Errc::WindowUnderflow, "episode needs at least one step inside the series");
  }
  for (auto p : prices_) {
    if (!(p > 0.0)) throw Error(Errc::NonPositivePrice, "price series contains a non-positive price");
  }
  max_buy_ = config_.max_buy_amount.value_or(config_.initial_balance / prices_[first_t_]);
  reset();
}

std::size_t TradingEnv::observation_dim() const noexcept {
  return observation_size(config_.window, features_->n_cols());
}

Observation TradingEnv::observe() const {
  return assemble_observation(*features_, state_.t, state_.cash, state_.asset, prices_[state_.t],
                              config_.initial_balance, config_.window);
}

Observation TradingEnv::reset() {
  state_ = EnvState{};
  state_.t = first_t_;
  state_.cash = config_.initial_balance;
  state_.last_gross_value = config_.initial_balance;
  done_ = false;
  trace_.clear();
  return observe();
}

StepResult TradingEnv::step(double action) {
  if (done_) throw Error(Errc::SteppedAfterDone, "episode already finished; call reset()");
  const double price = prices_[state_.t];
  const double before = gross_value(state_, price);
  auto [next, info] = execute_trade(state_, action, price, max_buy_, config_);
  next.t = state_.t + 1;
  const double after = gross_value(next, prices_[next.t]);
  next.last_gross_value = after;
  state_ = next;
  done_ = state_.t >= last_t_;

  StepResult result;
  result.reward = (after - before) * config_.reward_scale + (info.clamped ? config_.violation_penalty : 0.0);
  result.done = done_;
  result.info = info;
  result.observation = observe();
  trace_.push_back(TraceRow{state_.t - 1, price, std::clamp(action, -1.0, 1.0), info.executed_units, info.fee_paid,
                            state_.cash, state_.asset, after, result.reward});
  return result;
}

TradeInfo TradingEnv::liquidate() {
  if (!done_) throw Error(Errc::InvalidConfig, "liquidate() is only valid at the end of an episode");
  TradeInfo info;
  if (state_.asset <= 0.0) return info;
  const double price = prices_[state_.t];
  const double units = state_.asset;
  info.executed_units = -units;
  info.fee_paid = units * price * config_.fee_rate;
  state_.cash += units * price * (1.0 - config_.fee_rate);
  state_.asset = 0.0;
  state_.total_cost += info.fee_paid;
  ++state_.trade_count;
  state_.last_gross_value = state_.cash;
  return info;
}

std::string trace_to_csv(const std::vector<TraceRow>& rows) {
  std::string out = "t,price,action,executed_units,fee,cash,asset,gross_value,reward\n";
  for (const auto& r : rows) {
    out += std::to_string(r.t);
    for (double v : {r.price, r.action, r.executed_units, r.fee, r.cash, r.asset, r.gross_value, r.reward}) {
      out += ',';
      out += format_double(v);
    }
    out += '\n';
  }
  return out;
}

void write_trace_csv(const std::vector<TraceRow>& rows, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::IoError, "cannot open " + path.string() + " for writing");
  out << trace_to_csv(rows);
}

}  // namespace tradelab
