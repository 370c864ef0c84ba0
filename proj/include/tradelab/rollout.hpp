#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "tradelab/env.hpp"
#include "tradelab/neural.hpp"

namespace tradelab {

struct Transition {
  Observation obs;
  std::vector<double> action;      // executed (squashed) action
  std::vector<double> pre_squash;  // Gaussian sample behind `action`
  std::vector<double> mean;        // policy mean at collection time
  double log_prob = 0.0;
  double reward = 0.0;
  double value = 0.0;
  bool done = false;
};

/// Fixed-horizon on-policy batch. `last_value` bootstraps the state that
/// follows the final record.
struct RolloutBuffer {
  std::size_t capacity = 0;
  std::vector<Transition> steps;
  Observation last_obs;
  double last_value = 0.0;
  // Returns of episodes that finished inside this batch.
  std::vector<double> completed_returns;

  std::size_t size() const noexcept { return steps.size(); }
  bool full() const noexcept { return steps.size() == capacity; }
};

/// Carries the running episode return between collection calls.
struct EpisodeTracker {
  double running_return = 0.0;
  std::size_t episodes = 0;
};

/// Steps `env` n_steps times with stochastic policy samples, resetting on
/// episode end. Values come from `value_net` when given, else 0.
RolloutBuffer collect_rollout(TradingEnv& env, const GaussianPolicy& policy, const Mlp* value_net,
                              std::size_t n_steps, Rng& rng, EpisodeTracker& tracker);

struct GaeResult {
  std::vector<double> advantages;  // raw, not normalized
  std::vector<double> returns;     // advantages + values
};

GaeResult compute_gae(std::span<const double> rewards, std::span<const double> values,
                      std::span<const std::uint8_t> dones, double last_value, double gamma, double lambda);
GaeResult compute_gae(const RolloutBuffer& buffer, double gamma, double lambda);

/// In-place zero-mean / unit-variance rescaling; a constant vector maps to 0.
void normalize_advantages(std::vector<double>& advantages);

}  // namespace tradelab
