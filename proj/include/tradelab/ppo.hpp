#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "tradelab/rollout.hpp"
#include "tradelab/train_log.hpp"

namespace tradelab {

struct PpoConfig {
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double clip_range = 0.2;
  double ent_coef = 0.005;
  double learning_rate = 0.005;
  std::size_t n_steps = 32;
  std::size_t total_timesteps = 200000;
  std::size_t n_epochs = 10;
  std::size_t minibatch_size = 0;  // 0: the whole rollout
  double vf_coef = 0.5;
  double max_grad_norm = 0.5;      // <= 0 disables clipping
  double initial_log_std = 0.0;
  std::vector<std::size_t> hidden{64, 64};

  void validate() const;
};

/// min(r * A, clip(r, 1 - eps, 1 + eps) * A).
double ppo_clip_objective(double ratio, double advantage, double clip_range);

struct PpoModel {
  GaussianPolicy policy;
  Mlp value_net;
};

struct PpoLoss {
  double total = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double approx_kl = 0.0;
  double clip_fraction = 0.0;
  std::vector<double> policy_grad;  // over GaussianPolicy::flat_params()
  std::vector<double> value_grad;
};

struct PpoBatch {
  std::span<const Transition> steps;
  std::span<const double> advantages;  // already normalized
  std::span<const double> returns;
};

/// loss = -mean(min(rA, clip(r)A)) + vf_coef * mean((V - R)^2) - ent_coef * H,
/// with r = exp(new_log_prob - old_log_prob), plus exact gradients.
PpoLoss ppo_surrogate(const PpoBatch& batch, const PpoModel& model, const PpoConfig& config);

PpoModel ppo_init(std::size_t obs_dim, std::size_t action_dim, const PpoConfig& config, Rng& rng);

struct PpoResult {
  PpoModel model;
  std::vector<TrainLogRow> log;
  std::size_t updates = 0;
};

using PpoUpdateHook = std::function<void(const PpoModel&, const TrainLogRow&)>;

/// Alternates rollout collection, GAE and epochs of Adam on the clipped
/// surrogate until total_timesteps env steps are consumed. Throws
/// DivergenceDetected on a non-finite loss.
PpoResult ppo_train(TradingEnv& env, const PpoConfig& config, Rng& rng, const PpoUpdateHook& on_update = {});

/// Scales `grad` so its Euclidean norm is at most max_norm; returns the
/// norm before scaling.
double clip_grad_norm(std::span<double> grad, double max_norm);

}  // namespace tradelab
