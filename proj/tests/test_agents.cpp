#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>
#include <set>

#include "oracles.hpp"
#include "support.hpp"
#include "tradelab/error.hpp"
#include "tradelab/pipeline.hpp"
#include "tradelab/ppo.hpp"
#include "tradelab/sac.hpp"

using namespace tradelab;

namespace {

Errc code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected a tradelab::Error");
  return Errc::IoError;
}

FeatureConfig small_features() {
  FeatureConfig f;
  f.columns = {"close", "return", "rsi14"};
  return f;
}

PreparedData small_data(std::size_t n = 160) {
  return prepare_data(testing::sine_series(n), small_features(), 3, 0.8);
}

EnvConfig small_env() {
  EnvConfig e;
  e.window = 3;
  return e;
}

std::vector<double> params_of(const Mlp& m) { return {m.params().begin(), m.params().end()}; }

}  // namespace

TEST_CASE("clip objective grid") {
  CHECK(ppo_clip_objective(1.5, 1.0, 0.2) == doctest::Approx(1.2));
  CHECK(ppo_clip_objective(0.5, -1.0, 0.2) == doctest::Approx(-0.8));
  CHECK(ppo_clip_objective(0.9, 1.0, 0.2) == doctest::Approx(0.9));
  CHECK(ppo_clip_objective(1.1, -2.0, 0.2) == doctest::Approx(-2.2));
  for (double r = 0.0; r <= 3.0; r += 0.05) {
    for (double a = -3.0; a <= 3.0; a += 0.25) {
      CHECK(ppo_clip_objective(r, a, 0.2) <= 1.2 * std::fabs(a) + 1e-12);
      CHECK(ppo_clip_objective(1.0, a, 0.2) == a);
    }
  }
}

TEST_CASE("gae closed forms") {
  const std::vector<double> one{1.0}, zero1{0.0};
  const std::vector<std::uint8_t> term{1};
  CHECK(compute_gae(one, zero1, term, 0.0, 0.99, 0.95).advantages[0] == 1.0);
  const std::vector<double> r{1.0, 1.0}, v{0.0, 0.0};
  const std::vector<std::uint8_t> d{0, 1};
  const auto g = compute_gae(r, v, d, 123.0, 1.0, 1.0);
  CHECK(g.advantages[0] == 2.0);
  CHECK(g.advantages[1] == 1.0);
  CHECK(code_of([] { compute_gae(std::vector<double>{}, std::vector<double>{}, std::vector<std::uint8_t>{}, 0, 1, 1); }) ==
        Errc::EmptyBuffer);
}

TEST_CASE("gae matches the double loop") {
  Rng rng(42);
  std::normal_distribution<double> nd(0.0, 1.0);
  std::bernoulli_distribution term(0.25);
  for (double lambda : {0.0, 0.95, 1.0}) {
    for (double gamma : {0.9, 1.0}) {
      for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> r(5), v(5);
        std::vector<std::uint8_t> d(5);
        for (int i = 0; i < 5; ++i) {
          r[i] = nd(rng);
          v[i] = nd(rng);
          d[i] = term(rng);
        }
        const double last = nd(rng);
        const auto got = compute_gae(r, v, d, last, gamma, lambda);
        const auto want = oracle::gae(r, v, d, last, gamma, lambda);
        for (int i = 0; i < 5; ++i) {
          CHECK(std::fabs(got.advantages[i] - want[i]) < 1e-10);
          CHECK(got.returns[i] == doctest::Approx(want[i] + v[i]));
        }
      }
    }
  }
}

TEST_CASE("advantage normalization") {
  std::vector<double> a{1.0, 2.0, 3.0, 6.0};
  normalize_advantages(a);
  double m = 0, s = 0;
  for (double x : a) m += x;
  m /= 4;
  for (double x : a) s += (x - m) * (x - m);
  CHECK(std::fabs(m) < 1e-12);
  CHECK(s / 4 == doctest::Approx(1.0).epsilon(1e-6));
  std::vector<double> flat{2.0, 2.0, 2.0};
  normalize_advantages(flat);
  for (double x : flat) CHECK(x == 0.0);
}

TEST_CASE("rollout collection") {
  const auto data = small_data();
  auto env = make_train_env(data, small_env());
  Rng rng(1);
  auto pol = GaussianPolicy::initialized(env.observation_dim(), 1, {8}, rng);
  EpisodeTracker tr;
  Rng a(9);
  const auto buf = collect_rollout(env, pol, nullptr, 32, a, tr);
  CHECK(buf.size() == 32);
  CHECK(buf.full());

  // an episode boundary inside the buffer
  const auto len = env.episode_length();
  auto env2 = make_train_env(data, small_env());
  EpisodeTracker t2;
  Rng b(9);
  const auto long_buf = collect_rollout(env2, pol, nullptr, len + 5, b, t2);
  CHECK(long_buf.steps[len - 1].done);
  CHECK(long_buf.completed_returns.size() == 1);
  CHECK(t2.episodes == 1);
  CHECK(env2.state().t == env2.first_t() + 5);

  auto env3 = make_train_env(data, small_env());
  EpisodeTracker t3;
  Rng c(9);
  const auto again = collect_rollout(env3, pol, nullptr, len + 5, c, t3);
  for (std::size_t i = 0; i < again.size(); ++i) {
    CHECK(again.steps[i].action == long_buf.steps[i].action);
    CHECK(again.steps[i].reward == long_buf.steps[i].reward);
  }
}

TEST_CASE("ppo surrogate gradient agrees with finite differences") {
  const auto data = small_data();
  auto env = make_train_env(data, small_env());
  Rng rng(3);
  PpoConfig cfg;
  cfg.hidden = {8, 8};
  auto model = ppo_init(env.observation_dim(), 1, cfg, rng);
  EpisodeTracker tr;
  const auto buf = collect_rollout(env, model.policy, &model.value_net, 24, rng, tr);
  auto gae = compute_gae(buf, cfg.gamma, cfg.gae_lambda);
  auto adv = gae.advantages;
  normalize_advantages(adv);

  // move away from r = 1 so both clip branches appear
  auto flat = model.policy.flat_params();
  std::normal_distribution<double> nd(0.0, 0.05);
  for (auto& p : flat) p += nd(rng);
  model.policy.set_flat_params(flat);

  const PpoBatch batch{buf.steps, adv, gae.returns};
  const auto loss = ppo_surrogate(batch, model, cfg);
  const double h = 1e-6;
  for (std::size_t i = 0; i < flat.size(); i += 3) {
    auto plus = model, minus = model;
    auto fp = flat, fm = flat;
    fp[i] += h;
    fm[i] -= h;
    plus.policy.set_flat_params(fp);
    minus.policy.set_flat_params(fm);
    const double fd = (ppo_surrogate(batch, plus, cfg).total - ppo_surrogate(batch, minus, cfg).total) / (2 * h);
    // kinks at the clip boundary are measure-zero; skip the rare straddle
    if (std::fabs(fd - loss.policy_grad[i]) > 1e-4 * std::max(1.0, std::fabs(fd))) {
      const double fd2 = (ppo_surrogate(batch, plus, cfg).total - loss.total) / h;
      CHECK(std::fabs(fd2 - loss.policy_grad[i]) < 1e-3 * std::max(1.0, std::fabs(fd2)));
    }
  }
  for (std::size_t i = 0; i < model.value_net.num_params(); i += 5) {
    auto plus = model, minus = model;
    plus.value_net.params()[i] += h;
    minus.value_net.params()[i] -= h;
    const double fd = (ppo_surrogate(batch, plus, cfg).total - ppo_surrogate(batch, minus, cfg).total) / (2 * h);
    CHECK(std::fabs(fd - loss.value_grad[i]) < 1e-5 * std::max(1.0, std::fabs(fd)));
  }
}

TEST_CASE("first epoch policy loss vanishes after normalization") {
  const auto data = small_data();
  auto env = make_train_env(data, small_env());
  Rng rng(11);
  PpoConfig cfg;
  cfg.hidden = {8};
  const auto model = ppo_init(env.observation_dim(), 1, cfg, rng);
  EpisodeTracker tr;
  const auto buf = collect_rollout(env, model.policy, &model.value_net, 32, rng, tr);
  auto gae = compute_gae(buf, cfg.gamma, cfg.gae_lambda);
  auto adv = gae.advantages;
  normalize_advantages(adv);
  const auto loss = ppo_surrogate(PpoBatch{buf.steps, adv, gae.returns}, model, cfg);
  CHECK(std::fabs(loss.policy_loss) < 1e-12);
  CHECK(loss.clip_fraction == 0.0);
}

TEST_CASE("ppo training bookkeeping and determinism") {
  const auto data = small_data();
  PpoConfig cfg;
  cfg.hidden = {8, 8};
  cfg.total_timesteps = cfg.n_steps;
  {
    auto env = make_train_env(data, small_env());
    Rng rng(0);
    CHECK(ppo_train(env, cfg, rng).updates == 1);
  }
  cfg.total_timesteps = 320;
  auto run = [&] {
    auto env = make_train_env(data, small_env());
    Rng rng(21);
    return ppo_train(env, cfg, rng);
  };
  const auto a = run();
  const auto b = run();
  CHECK(a.updates == 10);
  CHECK(a.log.size() == 10);
  CHECK(a.model.policy.flat_params() == b.model.policy.flat_params());
  CHECK(params_of(a.model.value_net) == params_of(b.model.value_net));
  CHECK(train_log_to_csv(a.log) == train_log_to_csv(b.log));
}

TEST_CASE("gradient clipping") {
  std::vector<double> g{3.0, 4.0};
  CHECK(clip_grad_norm(g, 1.0) == 5.0);
  CHECK(std::hypot(g[0], g[1]) == doctest::Approx(1.0));
  std::vector<double> small{0.3, 0.4};
  clip_grad_norm(small, 1.0);
  CHECK(small[0] == 0.3);
}

TEST_CASE("replay buffer") {
  ReplayBuffer rb(5);
  for (int i = 0; i < 8; ++i) rb.add(ReplayItem{{static_cast<double>(i)}, {0.0}, 0.0, {0.0}, false});
  CHECK(rb.size() == 5);
  std::set<double> held;
  for (std::size_t i = 0; i < rb.size(); ++i) held.insert(rb[i].obs[0]);
  CHECK(held == std::set<double>{3, 4, 5, 6, 7});
  Rng rng(1);
  for (int k = 0; k < 50; ++k) {
    const auto idx = rb.sample_indices(4, rng);
    CHECK(idx.size() == 4);
    CHECK(std::set<std::size_t>(idx.begin(), idx.end()).size() == 4);
  }
  CHECK(rb.sample_indices(100, rng).size() == 5);
}

TEST_CASE("sac target arithmetic") {
  CHECK(sac_target(1.0, true, 0.99, 55.0, 0.3, -4.0) == 1.0);
  CHECK(sac_target(0.0, false, 0.99, 2.0, 0.1, -1.0) == doctest::Approx(2.079).epsilon(1e-12));
  CHECK(sac_target(0.5, false, 0.9, -1.0, 0.2, 0.5) == doctest::Approx(0.5 + 0.9 * (-1.0 - 0.1)));
}

TEST_CASE("polyak averaging") {
  Rng rng(2);
  const auto online = Mlp::initialized({3, 4, 1}, rng);
  auto target = Mlp::initialized({3, 4, 1}, rng);
  const auto before = params_of(target);
  polyak_update(online, target, 0.25);
  for (std::size_t i = 0; i < before.size(); ++i) {
    CHECK(target.params()[i] == 0.25 * online.params()[i] + 0.75 * before[i]);
  }
  polyak_update(online, target, 1.0);
  CHECK(params_of(target) == params_of(online));
}

TEST_CASE("sac update") {
  const auto data = small_data();
  auto env = make_train_env(data, small_env());
  SacConfig cfg;
  cfg.hidden = {8, 8};
  cfg.batch_size = 32;
  cfg.learning_starts = 50;
  Rng rng(4);
  auto nets = sac_init(env.observation_dim(), 1, cfg, rng);
  CHECK(nets.alpha() == doctest::Approx(0.1));
  ReplayBuffer rb(cfg.buffer_size);
  auto obs = env.reset();
  for (int i = 0; i < 49; ++i) {
    const auto s = nets.actor.sample(obs, rng);
    auto r = env.step(s.action[0]);
    rb.add(ReplayItem{obs, s.action, r.reward, r.observation, r.done});
    obs = r.done ? env.reset() : r.observation;
  }
  CHECK(code_of([&] { sac_update(rb, nets, cfg, rng); }) == Errc::BufferTooSmall);
  rb.add(ReplayItem{obs, {0.0}, 0.0, obs, true});
  cfg.tau = 1.0;
  const auto loss = sac_update(rb, nets, cfg, rng);
  CHECK(std::isfinite(loss.critic_loss));
  CHECK(params_of(nets.q1_target) == params_of(nets.q1));
  CHECK(params_of(nets.q2_target) == params_of(nets.q2));
  CHECK(nets.alpha() > 0.0);
}

TEST_CASE("sac training respects learning_starts") {
  const auto data = small_data();
  SacConfig cfg;
  cfg.hidden = {8, 8};
  cfg.batch_size = 16;
  cfg.total_timesteps = 199;
  {
    auto env = make_train_env(data, small_env());
    Rng rng(0);
    CHECK(sac_train(env, cfg, rng).updates == 0);
  }
  cfg.total_timesteps = 260;
  auto run = [&] {
    auto env = make_train_env(data, small_env());
    Rng rng(13);
    std::vector<double> alphas;
    auto res = sac_train(env, cfg, rng, [&](const SacNets& n, const TrainLogRow&) { alphas.push_back(n.alpha()); }, 10);
    for (double a : alphas) CHECK(a > 0.0);
    return res;
  };
  const auto a = run();
  const auto b = run();
  CHECK(a.updates == 61);
  CHECK(a.nets.actor.flat_params() == b.nets.actor.flat_params());
  CHECK(a.log.size() == 26);
}
