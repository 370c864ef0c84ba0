#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "tradelab/rollout.hpp"
#include "tradelab/train_log.hpp"
#include "tradelab/trpo.hpp"

namespace tradelab {

struct ExpertPair {
  Observation obs;
  std::vector<double> action;  // pre-squash policy mean
};

struct ExpertDataset {
  std::vector<ExpertPair> pairs;
  std::size_t size() const noexcept { return pairs.size(); }
};

/// Runs n_episodes full episodes with the deterministic (mean) action of
/// `expert` and keeps the first traj_limitation (obs, action) pairs.
ExpertDataset generate_expert_dataset(const GaussianPolicy& expert, TradingEnv& env, std::size_t n_episodes,
                                      std::size_t traj_limitation);

std::string expert_dataset_to_csv(const ExpertDataset& data);
ExpertDataset expert_dataset_from_csv(const std::string& text, std::size_t action_dim = 1);
void write_expert_dataset_csv(const ExpertDataset& data, const std::filesystem::path& path);
ExpertDataset read_expert_dataset_csv(const std::filesystem::path& path, std::size_t action_dim = 1);

/// Logistic classifier over concat(obs, action); D -> 1 marks generator pairs.
class Discriminator {
 public:
  Discriminator() = default;
  Discriminator(std::size_t obs_dim, std::size_t action_dim, const std::vector<std::size_t>& hidden, Rng& rng,
                double learning_rate);
  explicit Discriminator(Mlp net, double learning_rate = 3e-4);

  double logit(std::span<const double> obs, std::span<const double> action) const;
  double probability(std::span<const double> obs, std::span<const double> action) const;

  const Mlp& net() const noexcept { return net_; }
  Mlp& net() noexcept { return net_; }
  AdamState& optimizer() noexcept { return opt_; }

 private:
  Mlp net_;
  AdamState opt_;
};

struct PairBatch {
  std::vector<std::span<const double>> obs;
  std::vector<std::span<const double>> action;
  std::size_t size() const noexcept { return obs.size(); }
};

struct DiscriminatorStats {
  double objective = 0.0;  // mean_gen log D + mean_expert log(1 - D)
  double loss = 0.0;       // -objective
  double mean_d_generator = 0.0;
  double mean_d_expert = 0.0;
  std::vector<double> grad;
};

/// Objective value and gradient of the loss without updating anything.
DiscriminatorStats discriminator_objective(const Discriminator& disc, const PairBatch& expert,
                                           const PairBatch& generator);

/// One Adam step ascending the objective (descending its negation).
DiscriminatorStats gail_discriminator_update(Discriminator& disc, const PairBatch& expert,
                                             const PairBatch& generator);

inline constexpr double kDiscriminatorClamp = 1e-8;

/// -log D(obs, action) with D clamped to [1e-8, 1 - 1e-8].
double gail_reward(const Discriminator& disc, std::span<const double> obs, std::span<const double> action);
double gail_reward_from_probability(double d);

struct GailConfig {
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double entropy_weight = 1.0;  // lambda
  std::size_t n_expert_episodes = 10;
  std::size_t traj_limitation = 7000;
  double disc_learning_rate = 3e-4;
  std::size_t disc_steps = 1;
  double max_kl = 0.01;
  std::size_t cg_iters = 10;
  std::size_t backtracks = 10;
  double cg_damping = 0.01;
  std::size_t timesteps_per_batch = 1024;
  std::size_t total_timesteps = 100000;
  double value_learning_rate = 1e-3;
  std::size_t value_epochs = 5;
  double initial_log_std = 0.0;
  std::vector<std::size_t> hidden{64, 64};

  void validate() const;
};

struct GailResult {
  GaussianPolicy policy;
  Mlp value_net;
  Discriminator discriminator;
  std::vector<TrainLogRow> log;
  std::size_t iterations = 0;
};

using GailUpdateHook = std::function<void(const GaussianPolicy&, const TrainLogRow&)>;

/// Alternates generator rollouts, discriminator updates, reward relabeling
/// with gail_reward and TRPO policy steps on GAE advantages.
GailResult gail_train(TradingEnv& env, const ExpertDataset& expert, const GailConfig& config, Rng& rng,
                      const GailUpdateHook& on_update = {});

}  // namespace tradelab
