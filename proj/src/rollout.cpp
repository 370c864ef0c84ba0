#include "tradelab/rollout.hpp"

#include <cmath>
#include <numeric>

#include "tradelab/error.hpp"

namespace tradelab {

RolloutBuffer collect_rollout(TradingEnv& env, const GaussianPolicy& policy, const Mlp* value_net,
                              std::size_t n_steps, Rng& rng, EpisodeTracker& tracker) {
  RolloutBuffer buffer;
  buffer.capacity = n_steps;
  buffer.steps.reserve(n_steps);
  if (env.done()) env.reset();
  Observation obs = env.observe();
  for (std::size_t k = 0; k < n_steps; ++k) {
    auto sample = policy.sample(obs, rng);
    Transition tr;
    tr.value = value_net ? value_net->forward(obs)[0] : 0.0;
    auto result = env.step(sample.action[0]);
    tr.obs = std::move(obs);
    tr.action = std::move(sample.action);
    tr.pre_squash = std::move(sample.pre_squash);
    tr.mean = std::move(sample.mean);
    tr.log_prob = sample.log_prob;
    tr.reward = result.reward;
    tr.done = result.done;
    tracker.running_return += result.reward;
    if (result.done) {
      buffer.completed_returns.push_back(tracker.running_return);
      tracker.running_return = 0.0;
      ++tracker.episodes;
      obs = env.reset();
    } else {
      obs = std::move(result.observation);
    }
    buffer.steps.push_back(std::move(tr));
  }
  buffer.last_value = value_net ? value_net->forward(obs)[0] : 0.0;
  buffer.last_obs = std::move(obs);
  return buffer;
}

GaeResult compute_gae(std::span<const double> rewards, std::span<const double> values,
                      std::span<const std::uint8_t> dones, double last_value, double gamma, double lambda) {
  const auto n = rewards.size();
  if (n == 0) throw Error(Errc::EmptyBuffer, "compute_gae on an empty buffer");
  if (values.size() != n || dones.size() != n) throw Error(Errc::ShapeMismatch, "compute_gae: ragged inputs");
  GaeResult out{std::vector<double>(n), std::vector<double>(n)};
  double next_adv = 0.0;
  for (std::size_t k = n; k-- > 0;) {
    const double not_done = dones[k] ? 0.0 : 1.0;
    const double next_value = (k + 1 < n) ? values[k + 1] : last_value;
    const double delta = rewards[k] + gamma * next_value * not_done - values[k];
    next_adv = delta + gamma * lambda * not_done * next_adv;
    out.advantages[k] = next_adv;
    out.returns[k] = next_adv + values[k];
  }
  return out;
}

GaeResult compute_gae(const RolloutBuffer& buffer, double gamma, double lambda) {
  std::vector<double> rewards, values;
  std::vector<std::uint8_t> dones;
  for (const auto& s : buffer.steps) {
    rewards.push_back(s.reward);
    values.push_back(s.value);
    dones.push_back(s.done ? 1 : 0);
  }
  return compute_gae(rewards, values, dones, buffer.last_value, gamma, lambda);
}

void normalize_advantages(std::vector<double>& advantages) {
  if (advantages.empty()) return;
  const double n = static_cast<double>(advantages.size());
  const double mean = std::accumulate(advantages.begin(), advantages.end(), 0.0) / n;
  double var = 0.0;
  for (double a : advantages) var += (a - mean) * (a - mean);
  const double sd = std::sqrt(var / n);
  for (auto& a : advantages) a = sd > 0.0 ? (a - mean) / (sd + 1e-8) : 0.0;
}

}  // namespace tradelab
