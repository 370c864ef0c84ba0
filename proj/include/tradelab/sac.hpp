#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <vector>

#include "tradelab/env.hpp"
#include "tradelab/neural.hpp"
#include "tradelab/train_log.hpp"

namespace tradelab {

struct ReplayItem {
  Observation obs;
  std::vector<double> action;  // squashed
  double reward = 0.0;
  Observation next_obs;
  bool done = false;
};

/// Ring buffer; sampling is uniform without replacement inside one batch.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void add(ReplayItem item);
  std::size_t size() const noexcept { return items_.size(); }
  std::size_t capacity() const noexcept { return capacity_; }
  const ReplayItem& operator[](std::size_t i) const { return items_[i]; }

  /// min(batch_size, size()) distinct indices.
  std::vector<std::size_t> sample_indices(std::size_t batch_size, Rng& rng) const;

 private:
  std::size_t capacity_;
  std::size_t next_ = 0;
  std::vector<ReplayItem> items_;
};

struct SacConfig {
  double gamma = 0.99;
  double learning_rate = 0.01;
  std::size_t buffer_size = 1000;
  std::size_t batch_size = 1000;
  double initial_alpha = 0.1;
  bool auto_alpha = true;
  // NaN: -(action dim).
  double target_entropy = std::numeric_limits<double>::quiet_NaN();
  std::size_t learning_starts = 200;
  double tau = 0.005;
  std::size_t total_timesteps = 50000;
  double initial_log_std = 0.0;
  std::vector<std::size_t> hidden{64, 64};

  void validate() const;
};

/// r + gamma * (1 - done) * (min_q_next - alpha * log_pi_next).
double sac_target(double reward, bool done, double gamma, double min_q_next, double alpha, double log_pi_next);

struct SacNets {
  GaussianPolicy actor;
  Mlp q1, q2;
  Mlp q1_target, q2_target;
  double log_alpha = 0.0;
  AdamState actor_opt, q1_opt, q2_opt, alpha_opt;

  double alpha() const { return std::exp(log_alpha); }
};

SacNets sac_init(std::size_t obs_dim, std::size_t action_dim, const SacConfig& config, Rng& rng);

struct SacLoss {
  double critic_loss = 0.0;
  double actor_loss = 0.0;
  double alpha_loss = 0.0;
  double alpha = 0.0;
  double mean_log_pi = 0.0;
};

/// One gradient step on critics, actor and temperature from a sampled
/// batch, then Polyak averaging of the targets. Throws BufferTooSmall when
/// the replay holds fewer than learning_starts items.
SacLoss sac_update(const ReplayBuffer& replay, SacNets& nets, const SacConfig& config, Rng& rng);

/// target = tau * online + (1 - tau) * target, elementwise.
void polyak_update(const Mlp& online, Mlp& target, double tau);

struct SacResult {
  SacNets nets;
  std::vector<TrainLogRow> log;
  std::size_t updates = 0;
};

using SacUpdateHook = std::function<void(const SacNets&, const TrainLogRow&)>;

SacResult sac_train(TradingEnv& env, const SacConfig& config, Rng& rng, const SacUpdateHook& on_log = {},
                    std::size_t log_every = 1000);

}  // namespace tradelab
