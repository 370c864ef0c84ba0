#include "tradelab/sac.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tradelab/error.hpp"

namespace tradelab {

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ == 0) throw Error(Errc::InvalidConfig, "replay capacity must be >= 1");
  items_.reserve(capacity_);
}

void ReplayBuffer::add(ReplayItem item) {
  if (items_.size() < capacity_) {
    items_.push_back(std::move(item));
  } else {
    items_[next_] = std::move(item);
  }
  next_ = (next_ + 1) % capacity_;
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t batch_size, Rng& rng) const {
  const auto n = items_.size();
  const auto k = std::min(batch_size, n);
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  // Partial Fisher-Yates.
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(k);
  return idx;
}

void SacConfig::validate() const {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw Error(Errc::InvalidConfig, "sac gamma must lie in (0, 1]");
  if (!(initial_alpha > 0.0)) throw Error(Errc::InvalidConfig, "sac alpha must be > 0");
  if (!(tau > 0.0 && tau <= 1.0)) throw Error(Errc::InvalidConfig, "sac tau must lie in (0, 1]");
  if (buffer_size == 0 || batch_size == 0) throw Error(Errc::InvalidConfig, "sac buffer/batch size must be >= 1");
  if (!(learning_rate > 0.0)) throw Error(Errc::InvalidConfig, "sac learning_rate must be > 0");
}

double sac_target(double reward, bool done, double gamma, double min_q_next, double alpha, double log_pi_next) {
  return reward + gamma * (done ? 0.0 : 1.0) * (min_q_next - alpha * log_pi_next);
}

namespace {

Mlp make_critic(std::size_t obs_dim, std::size_t action_dim, const std::vector<std::size_t>& hidden, Rng& rng) {
  std::vector<std::size_t> sizes{obs_dim + action_dim};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(1);
  return Mlp::initialized(std::move(sizes), rng);
}

std::vector<double> concat(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> out;
  out.reserve(a.size() + b.size());
  out.insert(out.end(), a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

double target_entropy_of(const SacConfig& config, std::size_t action_dim) {
  return std::isnan(config.target_entropy) ? -static_cast<double>(action_dim) : config.target_entropy;
}

}  // namespace

SacNets sac_init(std::size_t obs_dim, std::size_t action_dim, const SacConfig& config, Rng& rng) {
  SacNets nets;
  nets.actor = GaussianPolicy::initialized(obs_dim, action_dim, config.hidden, rng, config.initial_log_std);
  nets.q1 = make_critic(obs_dim, action_dim, config.hidden, rng);
  nets.q2 = make_critic(obs_dim, action_dim, config.hidden, rng);
  nets.q1_target = nets.q1;
  nets.q2_target = nets.q2;
  nets.log_alpha = std::log(config.initial_alpha);
  nets.actor_opt = AdamState(nets.actor.num_params(), config.learning_rate);
  nets.q1_opt = AdamState(nets.q1.num_params(), config.learning_rate);
  nets.q2_opt = AdamState(nets.q2.num_params(), config.learning_rate);
  nets.alpha_opt = AdamState(1, config.learning_rate);
  return nets;
}

void polyak_update(const Mlp& online, Mlp& target, double tau) {
  if (online.num_params() != target.num_params()) throw Error(Errc::ShapeMismatch, "polyak: shape mismatch");
  auto src = online.params();
  auto dst = target.params();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = tau * src[i] + (1.0 - tau) * dst[i];
}

SacLoss sac_update(const ReplayBuffer& replay, SacNets& nets, const SacConfig& config, Rng& rng) {
  if (replay.size() == 0 || replay.size() < std::min(config.learning_starts, replay.capacity())) {
    throw Error(Errc::BufferTooSmall, "replay holds " + std::to_string(replay.size()) + " items, need " +
                                          std::to_string(config.learning_starts));
  }
  const auto idx = replay.sample_indices(config.batch_size, rng);
  const double inv_n = 1.0 / static_cast<double>(idx.size());
  const double alpha = nets.alpha();
  const auto adim = nets.actor.action_dim();
  const double h_target = target_entropy_of(config, adim);

  SacLoss out;
  out.alpha = alpha;

  // Critics.
  std::vector<double> g1(nets.q1.num_params(), 0.0), g2(nets.q2.num_params(), 0.0);
  Mlp::Cache c1, c2;
  for (auto i : idx) {
    const auto& it = replay[i];
    double y = it.reward;
    if (!it.done) {
      const auto next = nets.actor.sample(it.next_obs, rng);
      const auto sa_next = concat(it.next_obs, next.action);
      const double q_next = std::min(nets.q1_target.forward(sa_next)[0], nets.q2_target.forward(sa_next)[0]);
      y = sac_target(it.reward, false, config.gamma, q_next, alpha, next.log_prob);
    }
    const auto sa = concat(it.obs, it.action);
    const double q1 = nets.q1.forward(sa, c1)[0];
    const double q2 = nets.q2.forward(sa, c2)[0];
    out.critic_loss += 0.5 * ((q1 - y) * (q1 - y) + (q2 - y) * (q2 - y)) * inv_n;
    const double d1 = (q1 - y) * inv_n;
    const double d2 = (q2 - y) * inv_n;
    nets.q1.backward(c1, std::span<const double>(&d1, 1), g1);
    nets.q2.backward(c2, std::span<const double>(&d2, 1), g2);
  }
  if (!std::isfinite(out.critic_loss)) throw Error(Errc::DivergenceDetected, "non-finite SAC critic loss");
  adam_step(nets.q1.params(), g1, nets.q1_opt);
  adam_step(nets.q2.params(), g2, nets.q2_opt);

  // Actor, reparameterized: u = mean + std * z, a = tanh(u).
  const auto n_mean = nets.actor.mean_net().num_params();
  std::vector<double> ga(nets.actor.num_params(), 0.0);
  std::span<double> g_mean(ga.data(), n_mean);
  std::span<double> g_log_std(ga.data() + n_mean, adim);
  Mlp::Cache pc, qc1, qc2;
  std::vector<double> dq_dinput;
  std::vector<double> scratch(nets.q1.num_params());
  std::vector<double> upstream(adim);
  double log_pi_sum = 0.0;
  for (auto i : idx) {
    const auto& it = replay[i];
    const auto mu = nets.actor.mean_net().forward(it.obs, pc);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> z(adim);
    for (auto& v : z) v = normal(rng);
    const auto s = nets.actor.sample_with_noise(mu, z);
    const auto sa = concat(it.obs, s.action);
    const double q1 = nets.q1.forward(sa, qc1)[0];
    const double q2 = nets.q2.forward(sa, qc2)[0];
    const bool first = q1 <= q2;
    const double q = first ? q1 : q2;
    const double one = 1.0;
    (first ? nets.q1 : nets.q2).backward(first ? qc1 : qc2, std::span<const double>(&one, 1), scratch, &dq_dinput);

    out.actor_loss += (alpha * s.log_prob - q) * inv_n;
    log_pi_sum += s.log_prob;
    for (std::size_t d = 0; d < adim; ++d) {
      const double a = s.action[d];
      const double sigma = std::exp(nets.actor.log_std()[d]);
      const double dq_da = dq_dinput[it.obs.size() + d];
      const double dlogpi_du = 2.0 * a;  // from -log(1 - tanh(u)^2)
      const double dloss_du = alpha * dlogpi_du - dq_da * (1.0 - a * a);
      upstream[d] = dloss_du * inv_n;
      g_log_std[d] += (dloss_du * sigma * z[d] - alpha) * inv_n;
    }
    nets.actor.mean_net().backward(pc, upstream, g_mean);
  }
  out.mean_log_pi = log_pi_sum * inv_n;
  if (!std::isfinite(out.actor_loss)) throw Error(Errc::DivergenceDetected, "non-finite SAC actor loss");
  auto flat = nets.actor.flat_params();
  adam_step(flat, ga, nets.actor_opt);
  nets.actor.set_flat_params(flat);
  nets.actor.clamp_log_std();

  // Temperature: minimize -alpha * (log_pi + target_entropy).
  const double slack = out.mean_log_pi + h_target;
  out.alpha_loss = -alpha * slack;
  if (config.auto_alpha) {
    double la = nets.log_alpha;
    const double g = -alpha * slack;
    adam_step(std::span<double>(&la, 1), std::span<const double>(&g, 1), nets.alpha_opt);
    nets.log_alpha = la;
  }

  polyak_update(nets.q1, nets.q1_target, config.tau);
  polyak_update(nets.q2, nets.q2_target, config.tau);
  return out;
}

SacResult sac_train(TradingEnv& env, const SacConfig& config, Rng& rng, const SacUpdateHook& on_log,
                    std::size_t log_every) {
  config.validate();
  SacResult result;
  result.nets = sac_init(env.observation_dim(), 1, config, rng);
  auto& nets = result.nets;
  ReplayBuffer replay(config.buffer_size);

  Observation obs = env.reset();
  double running = 0.0;
  std::vector<double> finished;
  SacLoss last;
  for (std::size_t step = 1; step <= config.total_timesteps; ++step) {
    auto s = nets.actor.sample(obs, rng);
    auto r = env.step(s.action[0]);
    running += r.reward;
    replay.add(ReplayItem{obs, s.action, r.reward, r.observation, r.done});
    if (r.done) {
      finished.push_back(running);
      running = 0.0;
      obs = env.reset();
    } else {
      obs = std::move(r.observation);
    }
    if (step >= config.learning_starts) {
      last = sac_update(replay, nets, config, rng);
      ++result.updates;
    }
    if (step % log_every == 0 || step == config.total_timesteps) {
      TrainLogRow row;
      row.step = step;
      if (!finished.empty()) {
        row.episode_return =
            std::accumulate(finished.begin(), finished.end(), 0.0) / static_cast<double>(finished.size());
        finished.clear();
      }
      if (result.updates > 0) {
        row.policy_loss = last.actor_loss;
        row.value_loss = last.critic_loss;
      }
      row.entropy = nets.actor.entropy();
      row.alpha = nets.alpha();
      result.log.push_back(row);
      if (on_log) on_log(nets, row);
    }
  }
  return result;
}

}  // namespace tradelab
