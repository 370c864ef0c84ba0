#include "tradelab/gail.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "tradelab/error.hpp"
#include "tradelab/format.hpp"

namespace tradelab {

namespace {

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }
double sigmoid(double x) { return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

std::vector<double> concat(std::span<const double> a, std::span<const double> b) {
  std::vector<double> out(a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

}  // namespace

ExpertDataset generate_expert_dataset(const GaussianPolicy& expert, TradingEnv& env, std::size_t n_episodes,
                                      std::size_t traj_limitation) {
  ExpertDataset data;
  for (std::size_t ep = 0; ep < n_episodes && data.size() < traj_limitation; ++ep) {
    Observation obs = env.reset();
    while (!env.done() && data.size() < traj_limitation) {
      auto mu = expert.mean(obs);
      double action = std::tanh(mu[0]);
      auto step = env.step(action);
      data.pairs.push_back(ExpertPair{std::move(obs), std::move(mu)});
      obs = std::move(step.observation);
    }
  }
  if (data.pairs.empty()) throw Error(Errc::EmptyDataset, "expert rollouts produced no pairs");
  return data;
}

std::string expert_dataset_to_csv(const ExpertDataset& data) {
  std::string out;
  if (data.pairs.empty()) return out;
  const auto obs_dim = data.pairs.front().obs.size();
  const auto act_dim = data.pairs.front().action.size();
  for (std::size_t k = 0; k < obs_dim; ++k) out += "obs" + std::to_string(k) + ",";
  for (std::size_t k = 0; k < act_dim; ++k) out += (k ? ",action" : "action") + std::to_string(k);
  out += '\n';
  for (const auto& p : data.pairs) {
    for (double v : p.obs) {
      out += format_double(v);
      out += ',';
    }
    for (std::size_t k = 0; k < p.action.size(); ++k) {
      if (k) out += ',';
      out += format_double(p.action[k]);
    }
    out += '\n';
  }
  return out;
}

ExpertDataset expert_dataset_from_csv(const std::string& text, std::size_t action_dim) {
  std::istringstream in(text);
  std::string line;
  ExpertDataset data;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (header) {
      header = false;
      continue;
    }
    std::vector<double> cells;
    std::istringstream row(line);
    std::string cell;
    while (std::getline(row, cell, ',')) {
      try {
        cells.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw Error(Errc::MalformedRow, "expert dataset cell is not numeric: '" + cell + "'");
      }
    }
    if (cells.size() <= action_dim) throw Error(Errc::MalformedRow, "expert dataset row too short");
    ExpertPair p;
    p.obs.assign(cells.begin(), cells.end() - static_cast<std::ptrdiff_t>(action_dim));
    p.action.assign(cells.end() - static_cast<std::ptrdiff_t>(action_dim), cells.end());
    if (!data.pairs.empty() && p.obs.size() != data.pairs.front().obs.size()) {
      throw Error(Errc::DimensionMismatch, "ragged expert dataset rows");
    }
    data.pairs.push_back(std::move(p));
  }
  if (data.pairs.empty()) throw Error(Errc::EmptyDataset, "expert dataset has no rows");
  return data;
}

void write_expert_dataset_csv(const ExpertDataset& data, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::IoError, "cannot open " + path.string() + " for writing");
  out << expert_dataset_to_csv(data);
}

ExpertDataset read_expert_dataset_csv(const std::filesystem::path& path, std::size_t action_dim) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return expert_dataset_from_csv(buffer.str(), action_dim);
}

Discriminator::Discriminator(std::size_t obs_dim, std::size_t action_dim, const std::vector<std::size_t>& hidden,
                             Rng& rng, double learning_rate) {
  std::vector<std::size_t> sizes{obs_dim + action_dim};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(1);
  net_ = Mlp::initialized(std::move(sizes), rng);
  opt_ = AdamState(net_.num_params(), learning_rate);
}

Discriminator::Discriminator(Mlp net, double learning_rate)
    : net_(std::move(net)), opt_(net_.num_params(), learning_rate) {}

double Discriminator::logit(std::span<const double> obs, std::span<const double> action) const {
  return net_.forward(concat(obs, action))[0];
}

double Discriminator::probability(std::span<const double> obs, std::span<const double> action) const {
  return sigmoid(logit(obs, action));
}

DiscriminatorStats discriminator_objective(const Discriminator& disc, const PairBatch& expert,
                                           const PairBatch& generator) {
  if (expert.size() == 0 || generator.size() == 0) {
    throw Error(Errc::EmptyBuffer, "discriminator update needs non-empty expert and generator batches");
  }
  const auto& net = disc.net();
  DiscriminatorStats stats;
  stats.grad.assign(net.num_params(), 0.0);
  Mlp::Cache cache;

  const double inv_g = 1.0 / static_cast<double>(generator.size());
  for (std::size_t i = 0; i < generator.size(); ++i) {
    const double l = net.forward(concat(generator.obs[i], generator.action[i]), cache)[0];
    const double d = sigmoid(l);
    stats.objective += -softplus(-l) * inv_g;
    stats.mean_d_generator += d * inv_g;
    const double up = -(1.0 - d) * inv_g;
    net.backward(cache, std::span<const double>(&up, 1), stats.grad);
  }
  const double inv_e = 1.0 / static_cast<double>(expert.size());
  for (std::size_t i = 0; i < expert.size(); ++i) {
    const double l = net.forward(concat(expert.obs[i], expert.action[i]), cache)[0];
    const double d = sigmoid(l);
    stats.objective += -softplus(l) * inv_e;
    stats.mean_d_expert += d * inv_e;
    const double up = d * inv_e;
    net.backward(cache, std::span<const double>(&up, 1), stats.grad);
  }
  stats.loss = -stats.objective;
  return stats;
}

DiscriminatorStats gail_discriminator_update(Discriminator& disc, const PairBatch& expert,
                                             const PairBatch& generator) {
  auto stats = discriminator_objective(disc, expert, generator);
  if (!std::isfinite(stats.loss)) throw Error(Errc::DivergenceDetected, "non-finite discriminator loss");
  adam_step(disc.net().params(), stats.grad, disc.optimizer());
  return stats;
}

double gail_reward_from_probability(double d) {
  return -std::log(std::clamp(d, kDiscriminatorClamp, 1.0 - kDiscriminatorClamp));
}

double gail_reward(const Discriminator& disc, std::span<const double> obs, std::span<const double> action) {
  return gail_reward_from_probability(disc.probability(obs, action));
}

void GailConfig::validate() const {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw Error(Errc::InvalidConfig, "gail gamma must lie in (0, 1]");
  if (!(max_kl > 0.0)) throw Error(Errc::InvalidConfig, "gail max_kl must be > 0");
  if (!(entropy_weight >= 0.0)) throw Error(Errc::InvalidConfig, "gail entropy weight must be >= 0");
  if (timesteps_per_batch == 0) throw Error(Errc::InvalidConfig, "gail timesteps_per_batch must be >= 1");
}

GailResult gail_train(TradingEnv& env, const ExpertDataset& expert, const GailConfig& config, Rng& rng,
                      const GailUpdateHook& on_update) {
  config.validate();
  if (expert.pairs.empty()) throw Error(Errc::EmptyDataset, "GAIL needs a non-empty expert dataset");
  const auto obs_dim = env.observation_dim();
  const std::size_t action_dim = 1;
  if (expert.pairs.front().obs.size() != obs_dim || expert.pairs.front().action.size() != action_dim) {
    throw Error(Errc::DimensionMismatch, "expert dataset dimensions do not match the environment");
  }

  GailResult result;
  result.policy = GaussianPolicy::initialized(obs_dim, action_dim, config.hidden, rng, config.initial_log_std);
  std::vector<std::size_t> vsizes{obs_dim};
  vsizes.insert(vsizes.end(), config.hidden.begin(), config.hidden.end());
  vsizes.push_back(1);
  result.value_net = Mlp::initialized(std::move(vsizes), rng);
  result.discriminator = Discriminator(obs_dim, action_dim, config.hidden, rng, config.disc_learning_rate);
  AdamState value_opt(result.value_net.num_params(), config.value_learning_rate);

  const TrpoConfig trpo{config.max_kl, config.cg_iters, config.backtracks, config.cg_damping, config.entropy_weight};
  EpisodeTracker tracker;
  env.reset();
  std::size_t steps_done = 0;
  std::vector<std::size_t> expert_idx(expert.size());
  std::iota(expert_idx.begin(), expert_idx.end(), std::size_t{0});

  while (steps_done < config.total_timesteps) {
    const auto horizon = std::min(config.timesteps_per_batch, config.total_timesteps - steps_done);
    auto buffer = collect_rollout(env, result.policy, &result.value_net, horizon, rng, tracker);
    steps_done += horizon;

    PairBatch gen_batch;
    for (const auto& s : buffer.steps) {
      gen_batch.obs.emplace_back(s.obs);
      gen_batch.action.emplace_back(s.pre_squash);
    }
    DiscriminatorStats dstats;
    for (std::size_t k = 0; k < config.disc_steps; ++k) {
      const auto take = std::min(horizon, expert.size());
      for (std::size_t i = 0; i < take; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, expert_idx.size() - 1);
        std::swap(expert_idx[i], expert_idx[pick(rng)]);
      }
      PairBatch exp_batch;
      for (std::size_t i = 0; i < take; ++i) {
        exp_batch.obs.emplace_back(expert.pairs[expert_idx[i]].obs);
        exp_batch.action.emplace_back(expert.pairs[expert_idx[i]].action);
      }
      dstats = gail_discriminator_update(result.discriminator, exp_batch, gen_batch);
    }

    double env_return_sum = 0.0;
    for (double r : buffer.completed_returns) env_return_sum += r;
    for (auto& s : buffer.steps) s.reward = gail_reward(result.discriminator, s.obs, s.pre_squash);

    auto gae = compute_gae(buffer, config.gamma, config.gae_lambda);
    auto advantages = gae.advantages;
    normalize_advantages(advantages);
    const auto trpo_result = trpo_step(result.policy, TrpoBatch{buffer.steps, advantages}, trpo);

    double value_loss = 0.0;
    std::vector<double> vgrad(result.value_net.num_params());
    Mlp::Cache cache;
    const double inv_n = 1.0 / static_cast<double>(buffer.size());
    for (std::size_t epoch = 0; epoch < config.value_epochs; ++epoch) {
      std::fill(vgrad.begin(), vgrad.end(), 0.0);
      value_loss = 0.0;
      for (std::size_t i = 0; i < buffer.size(); ++i) {
        const double err = result.value_net.forward(buffer.steps[i].obs, cache)[0] - gae.returns[i];
        value_loss += err * err * inv_n;
        const double up = 2.0 * err * inv_n;
        result.value_net.backward(cache, std::span<const double>(&up, 1), vgrad);
      }
      if (!std::isfinite(value_loss)) throw Error(Errc::DivergenceDetected, "non-finite GAIL value loss");
      adam_step(result.value_net.params(), vgrad, value_opt);
    }
    ++result.iterations;

    TrainLogRow row;
    row.step = steps_done;
    if (!buffer.completed_returns.empty()) {
      row.episode_return = env_return_sum / static_cast<double>(buffer.completed_returns.size());
    }
    row.policy_loss = -trpo_result.surrogate_after;
    row.value_loss = value_loss;
    row.entropy = result.policy.entropy();
    row.kl = trpo_result.kl;
    row.disc_loss = dstats.loss;
    result.log.push_back(row);
    if (on_update) on_update(result.policy, row);
  }
  return result;
}

}  // namespace tradelab
