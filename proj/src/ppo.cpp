#include "tradelab/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tradelab/error.hpp"

namespace tradelab {

void PpoConfig::validate() const {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw Error(Errc::InvalidConfig, "ppo gamma must lie in (0, 1]");
  if (!(clip_range > 0.0 && clip_range < 1.0)) throw Error(Errc::InvalidConfig, "ppo clip_range must lie in (0, 1)");
  if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0)) throw Error(Errc::InvalidConfig, "ppo gae_lambda must lie in [0, 1]");
  if (!(learning_rate > 0.0)) throw Error(Errc::InvalidConfig, "ppo learning_rate must be > 0");
  if (n_steps == 0 || n_epochs == 0) throw Error(Errc::InvalidConfig, "ppo n_steps and n_epochs must be >= 1");
}

double ppo_clip_objective(double ratio, double advantage, double clip_range) {
  const double clipped = std::clamp(ratio, 1.0 - clip_range, 1.0 + clip_range);
  return std::min(ratio * advantage, clipped * advantage);
}

double clip_grad_norm(std::span<double> grad, double max_norm) {
  const double norm = std::sqrt(std::inner_product(grad.begin(), grad.end(), grad.begin(), 0.0));
  if (max_norm > 0.0 && norm > max_norm) {
    const double scale = max_norm / (norm + 1e-12);
    for (auto& g : grad) g *= scale;
  }
  return norm;
}

PpoModel ppo_init(std::size_t obs_dim, std::size_t action_dim, const PpoConfig& config, Rng& rng) {
  PpoModel model;
  model.policy = GaussianPolicy::initialized(obs_dim, action_dim, config.hidden, rng, config.initial_log_std);
  std::vector<std::size_t> vsizes{obs_dim};
  vsizes.insert(vsizes.end(), config.hidden.begin(), config.hidden.end());
  vsizes.push_back(1);
  model.value_net = Mlp::initialized(std::move(vsizes), rng);
  return model;
}

PpoLoss ppo_surrogate(const PpoBatch& batch, const PpoModel& model, const PpoConfig& config) {
  const auto n = batch.steps.size();
  if (n == 0) throw Error(Errc::EmptyBuffer, "ppo_surrogate on an empty batch");
  if (batch.advantages.size() != n || batch.returns.size() != n) {
    throw Error(Errc::ShapeMismatch, "ppo_surrogate: advantages/returns do not match the batch");
  }
  const auto& policy = model.policy;
  const auto& mean_net = policy.mean_net();
  const auto adim = policy.action_dim();
  const auto n_mean = mean_net.num_params();
  const double inv_n = 1.0 / static_cast<double>(n);

  PpoLoss loss;
  loss.policy_grad.assign(policy.num_params(), 0.0);
  loss.value_grad.assign(model.value_net.num_params(), 0.0);
  std::span<double> mean_grad(loss.policy_grad.data(), n_mean);
  std::span<double> log_std_grad(loss.policy_grad.data() + n_mean, adim);

  Mlp::Cache pcache, vcache;
  std::vector<double> upstream(adim);
  std::size_t clipped = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& tr = batch.steps[i];
    const double adv = batch.advantages[i];
    const auto mu = mean_net.forward(tr.obs, pcache);
    const double new_lp = policy.log_prob(mu, tr.pre_squash);
    const double log_ratio = new_lp - tr.log_prob;
    const double ratio = std::exp(log_ratio);
    loss.policy_loss -= ppo_clip_objective(ratio, adv, config.clip_range) * inv_n;
    loss.approx_kl += ((ratio - 1.0) - log_ratio) * inv_n;

    const bool unclipped_active = ratio * adv <= std::clamp(ratio, 1.0 - config.clip_range, 1.0 + config.clip_range) * adv;
    if (std::abs(ratio - 1.0) > config.clip_range) ++clipped;
    if (unclipped_active) {
      // d(-r A / n)/d(log_prob) = -r A / n
      const double dlogp = -ratio * adv * inv_n;
      for (std::size_t d = 0; d < adim; ++d) {
        const double sigma = std::exp(policy.log_std()[d]);
        const double z = (tr.pre_squash[d] - mu[d]) / sigma;
        upstream[d] = dlogp * z / sigma;
        log_std_grad[d] += dlogp * (z * z - 1.0);
      }
      mean_net.backward(pcache, upstream, mean_grad);
    }

    const double v = model.value_net.forward(tr.obs, vcache)[0];
    const double err = v - batch.returns[i];
    loss.value_loss += err * err * inv_n;
    const double dv = config.vf_coef * 2.0 * err * inv_n;
    model.value_net.backward(vcache, std::span<const double>(&dv, 1), loss.value_grad);
  }
  loss.entropy = policy.entropy();
  for (std::size_t d = 0; d < adim; ++d) log_std_grad[d] -= config.ent_coef;
  loss.clip_fraction = static_cast<double>(clipped) * inv_n;
  loss.total = loss.policy_loss + config.vf_coef * loss.value_loss - config.ent_coef * loss.entropy;
  return loss;
}

PpoResult ppo_train(TradingEnv& env, const PpoConfig& config, Rng& rng, const PpoUpdateHook& on_update) {
  config.validate();
  PpoResult result;
  result.model = ppo_init(env.observation_dim(), 1, config, rng);
  auto& model = result.model;

  AdamState policy_opt(model.policy.num_params(), config.learning_rate);
  AdamState value_opt(model.value_net.num_params(), config.learning_rate);
  EpisodeTracker tracker;
  env.reset();

  std::size_t steps_done = 0;
  std::vector<std::size_t> order;
  while (steps_done < config.total_timesteps) {
    const auto horizon = std::min(config.n_steps, config.total_timesteps - steps_done);
    auto buffer = collect_rollout(env, model.policy, &model.value_net, horizon, rng, tracker);
    steps_done += horizon;

    auto gae = compute_gae(buffer, config.gamma, config.gae_lambda);
    auto advantages = gae.advantages;
    normalize_advantages(advantages);

    const auto n = buffer.size();
    const auto mb = config.minibatch_size == 0 ? n : std::min(config.minibatch_size, n);
    order.resize(n);
    std::iota(order.begin(), order.end(), std::size_t{0});

    PpoLoss last;
    double kl_sum = 0.0;
    std::size_t kl_count = 0;
    std::vector<Transition> mb_steps;
    std::vector<double> mb_adv, mb_ret;
    for (std::size_t epoch = 0; epoch < config.n_epochs; ++epoch) {
      if (mb < n) std::shuffle(order.begin(), order.end(), rng);
      for (std::size_t start = 0; start < n; start += mb) {
        const auto end = std::min(start + mb, n);
        PpoBatch batch;
        if (mb == n) {
          batch = PpoBatch{buffer.steps, advantages, gae.returns};
        } else {
          mb_steps.clear();
          mb_adv.clear();
          mb_ret.clear();
          for (auto k = start; k < end; ++k) {
            mb_steps.push_back(buffer.steps[order[k]]);
            mb_adv.push_back(advantages[order[k]]);
            mb_ret.push_back(gae.returns[order[k]]);
          }
          batch = PpoBatch{mb_steps, mb_adv, mb_ret};
        }
        last = ppo_surrogate(batch, model, config);
        if (!std::isfinite(last.total)) {
          throw Error(Errc::DivergenceDetected, "non-finite PPO loss at step " + std::to_string(steps_done));
        }
        kl_sum += last.approx_kl;
        ++kl_count;
        if (config.max_grad_norm > 0.0) {
          std::vector<double> joint(last.policy_grad);
          joint.insert(joint.end(), last.value_grad.begin(), last.value_grad.end());
          clip_grad_norm(joint, config.max_grad_norm);
          std::copy(joint.begin(), joint.begin() + static_cast<std::ptrdiff_t>(last.policy_grad.size()),
                    last.policy_grad.begin());
          std::copy(joint.begin() + static_cast<std::ptrdiff_t>(last.policy_grad.size()), joint.end(),
                    last.value_grad.begin());
        }
        auto flat = model.policy.flat_params();
        adam_step(flat, last.policy_grad, policy_opt);
        model.policy.set_flat_params(flat);
        model.policy.clamp_log_std();
        adam_step(model.value_net.params(), last.value_grad, value_opt);
      }
    }
    ++result.updates;

    TrainLogRow row;
    row.step = steps_done;
    if (!buffer.completed_returns.empty()) {
      row.episode_return = std::accumulate(buffer.completed_returns.begin(), buffer.completed_returns.end(), 0.0) /
                           static_cast<double>(buffer.completed_returns.size());
    }
    row.policy_loss = last.policy_loss;
    row.value_loss = last.value_loss;
    row.entropy = last.entropy;
    row.kl = kl_count ? kl_sum / static_cast<double>(kl_count) : 0.0;
    result.log.push_back(row);
    if (on_update) on_update(model, row);
  }
  return result;
}

}  // namespace tradelab
