#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <functional>

#include "support.hpp"
#include "tradelab/error.hpp"
#include "tradelab/gail.hpp"
#include "tradelab/pipeline.hpp"
#include "tradelab/trpo.hpp"

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

PreparedData small_data() {
  FeatureConfig f;
  f.columns = {"close", "return", "rsi14"};
  return prepare_data(testing::sine_series(160), f, 3, 0.8);
}

EnvConfig small_env() {
  EnvConfig e;
  e.window = 3;
  return e;
}

struct SyntheticBatch {
  std::vector<Transition> steps;
  std::vector<double> advantages;
};

SyntheticBatch synthetic_batch(const GaussianPolicy& pol, std::size_t n, Rng& rng) {
  std::normal_distribution<double> nd(0.0, 1.0);
  SyntheticBatch b;
  for (std::size_t i = 0; i < n; ++i) {
    Transition t;
    t.obs.resize(pol.obs_dim());
    for (auto& x : t.obs) x = nd(rng);
    const auto s = pol.sample(t.obs, rng);
    t.action = s.action;
    t.pre_squash = s.pre_squash;
    t.mean = s.mean;
    t.log_prob = s.log_prob;
    b.steps.push_back(std::move(t));
    b.advantages.push_back(nd(rng) + 0.5 * s.noise[0]);
  }
  normalize_advantages(b.advantages);
  return b;
}

PairBatch as_pairs(const std::vector<std::vector<double>>& obs, const std::vector<std::vector<double>>& act) {
  PairBatch p;
  for (std::size_t i = 0; i < obs.size(); ++i) {
    p.obs.emplace_back(obs[i]);
    p.action.emplace_back(act[i]);
  }
  return p;
}

}  // namespace

TEST_CASE("conjugate gradient solves small systems") {
  const LinearOperator identity = [](std::span<const double> v) { return std::vector<double>(v.begin(), v.end()); };
  const std::vector<double> g{0.3, -2.0, 7.5};
  CHECK(conjugate_gradient(identity, g, 10) == g);

  const LinearOperator diag = [](std::span<const double> v) { return std::vector<double>{2.0 * v[0], 4.0 * v[1]}; };
  const auto x = conjugate_gradient(diag, std::vector<double>{2.0, 4.0}, 10);
  CHECK(x[0] == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(x[1] == doctest::Approx(1.0).epsilon(1e-14));

  const LinearOperator full = [](std::span<const double> v) {
    return std::vector<double>{4.0 * v[0] + 1.0 * v[1], 1.0 * v[0] + 3.0 * v[1]};
  };
  const auto y = conjugate_gradient(full, std::vector<double>{1.0, 2.0}, 2);
  CHECK(y[0] == doctest::Approx(1.0 / 11.0).epsilon(1e-12));
  CHECK(y[1] == doctest::Approx(7.0 / 11.0).epsilon(1e-12));
}

TEST_CASE("fisher product is the curvature of the KL") {
  Rng rng(3);
  auto pol = GaussianPolicy::initialized(4, 1, {6, 6}, rng, -0.4);
  const auto batch = synthetic_batch(pol, 16, rng);
  std::vector<std::vector<double>> means;
  for (const auto& t : batch.steps) means.push_back(pol.mean(t.obs));
  const std::vector<double> log_std(pol.log_std().begin(), pol.log_std().end());
  const auto base = pol.flat_params();
  std::normal_distribution<double> nd(0.0, 1.0);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<double> v(base.size());
    for (auto& x : v) x = nd(rng);
    const auto fv = fisher_vector_product(pol, batch.steps, v);
    double vfv = 0;
    for (std::size_t i = 0; i < v.size(); ++i) vfv += v[i] * fv[i];
    const double eps = 1e-4;
    auto moved = pol;
    auto p = base;
    for (std::size_t i = 0; i < p.size(); ++i) p[i] += eps * v[i];
    moved.set_flat_params(p);
    const double kl = mean_kl(means, log_std, moved, batch.steps);
    CHECK(2.0 * kl / (eps * eps) == doctest::Approx(vfv).epsilon(1e-3));
  }
}

TEST_CASE("accepted trpo steps respect the KL bound") {
  Rng rng(7);
  int accepted = 0;
  for (int trial = 0; trial < 20; ++trial) {
    auto pol = GaussianPolicy::initialized(5, 1, {8, 8}, rng);
    const auto batch = synthetic_batch(pol, 64, rng);
    std::vector<std::vector<double>> means;
    for (const auto& t : batch.steps) means.push_back(pol.mean(t.obs));
    const std::vector<double> log_std(pol.log_std().begin(), pol.log_std().end());
    TrpoConfig cfg;
    const auto res = trpo_step(pol, TrpoBatch{batch.steps, batch.advantages}, cfg);
    if (res.accepted) {
      ++accepted;
      CHECK(mean_kl(means, log_std, pol, batch.steps) <= cfg.max_kl);
      CHECK(res.surrogate_after > res.surrogate_before);
    }
  }
  CHECK(accepted >= 15);
}

TEST_CASE("failed searches leave the policy untouched") {
  Rng rng(9);
  auto pol = GaussianPolicy::initialized(5, 1, {8}, rng);
  const auto batch = synthetic_batch(pol, 32, rng);
  const auto before = pol.flat_params();
  TrpoConfig none;
  none.backtracks = 0;
  CHECK_FALSE(trpo_step(pol, TrpoBatch{batch.steps, batch.advantages}, none).accepted);
  CHECK(pol.flat_params() == before);

  std::vector<double> zero(batch.advantages.size(), 0.0);
  const auto flat = trpo_step(pol, TrpoBatch{batch.steps, zero}, TrpoConfig{});
  CHECK_FALSE(flat.accepted);
  CHECK_FALSE(flat.warning.empty());
  CHECK(pol.flat_params() == before);
}

TEST_CASE("discriminator objective closed forms") {
  Discriminator half(Mlp({3, 4, 1}));
  const std::vector<std::vector<double>> o{{1, 2}, {3, 4}, {-1, 0}}, a{{0.1}, {0.2}, {-0.5}};
  const auto batch = as_pairs(o, a);
  const auto s = discriminator_objective(half, batch, batch);
  CHECK(s.objective == doctest::Approx(-1.386294).epsilon(1e-6));
  CHECK(s.objective == doctest::Approx(2.0 * std::log(0.5)).epsilon(1e-15));
  CHECK(s.mean_d_generator == 0.5);
  // identical batches: no parameter direction beats the 0.5 optimum for the output bias
  Rng rng(1);
  Discriminator d(2, 1, {8}, rng, 1e-3);
  for (int i = 0; i < 50; ++i) gail_discriminator_update(d, batch, batch);
  CHECK(discriminator_objective(d, batch, batch).objective <= -2.0 * std::log(2.0) + 1e-12);
}

TEST_CASE("discriminator gradient matches finite differences") {
  Rng rng(5);
  Discriminator d(3, 1, {6, 6}, rng, 1e-3);
  std::normal_distribution<double> nd(0.0, 1.0);
  std::vector<std::vector<double>> eo(7), ea(7), go(5), ga(5);
  for (auto* v : {&eo, &go})
    for (auto& x : *v) x = {nd(rng), nd(rng), nd(rng)};
  for (auto* v : {&ea, &ga})
    for (auto& x : *v) x = {nd(rng)};
  const auto e = as_pairs(eo, ea), g = as_pairs(go, ga);
  const auto s = discriminator_objective(d, e, g);
  const double h = 1e-6;
  for (std::size_t i = 0; i < d.net().num_params(); ++i) {
    const double keep = d.net().params()[i];
    d.net().params()[i] = keep + h;
    const double lp = discriminator_objective(d, e, g).loss;
    d.net().params()[i] = keep - h;
    const double lm = discriminator_objective(d, e, g).loss;
    d.net().params()[i] = keep;
    CHECK(std::fabs((lp - lm) / (2 * h) - s.grad[i]) < 1e-6 * std::max(1.0, std::fabs(s.grad[i])));
  }
}

TEST_CASE("discriminator separates a linearly separable toy") {
  Rng rng(2);
  std::normal_distribution<double> nd(0.0, 0.3);
  std::vector<std::vector<double>> eo, ea, go, ga;
  for (int i = 0; i < 64; ++i) {
    eo.push_back({-1.0 + nd(rng), nd(rng)});
    ea.push_back({-1.0 + nd(rng)});
    go.push_back({1.0 + nd(rng), nd(rng)});
    ga.push_back({1.0 + nd(rng)});
  }
  Discriminator d(2, 1, {16, 16}, rng, 1e-2);
  DiscriminatorStats s;
  for (int i = 0; i < 200; ++i) s = gail_discriminator_update(d, as_pairs(eo, ea), as_pairs(go, ga));
  s = discriminator_objective(d, as_pairs(eo, ea), as_pairs(go, ga));
  CHECK(s.mean_d_generator > 0.9);
  CHECK(s.mean_d_expert < 0.1);
}

TEST_CASE("imitation reward") {
  CHECK(gail_reward_from_probability(0.5) == doctest::Approx(0.6931).epsilon(1e-4));
  CHECK(gail_reward_from_probability(1.0) == doctest::Approx(0.0).scale(1.0).epsilon(1e-7));
  CHECK(gail_reward_from_probability(0.0) == doctest::Approx(18.42).epsilon(1e-3));
  CHECK(gail_reward_from_probability(1e-30) == gail_reward_from_probability(0.0));
  for (double p = 0.0; p <= 1.0; p += 0.01) CHECK(gail_reward_from_probability(p) >= 0.0);
}

TEST_CASE("expert dataset") {
  const auto data = small_data();
  auto env = make_train_env(data, small_env());
  Rng rng(4);
  const auto expert = GaussianPolicy::initialized(env.observation_dim(), 1, {8}, rng);
  const auto len = env.episode_length();
  const auto ds = generate_expert_dataset(expert, env, 10, 100000);
  CHECK(ds.size() == 10 * len);
  const auto cut = generate_expert_dataset(expert, env, 10, 7 * len + 3);
  CHECK(cut.size() == 7 * len + 3);
  const auto again = generate_expert_dataset(expert, env, 10, 100000);
  CHECK(expert_dataset_to_csv(again) == expert_dataset_to_csv(ds));
  CHECK(ds.pairs[0].action == expert.mean(ds.pairs[0].obs));

  const auto text = expert_dataset_to_csv(cut);
  CHECK(text.rfind("obs0,", 0) == 0);
  const auto back = expert_dataset_from_csv(text);
  REQUIRE(back.size() == cut.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back.pairs[i].obs == cut.pairs[i].obs);
    CHECK(back.pairs[i].action == cut.pairs[i].action);
  }
  const auto path = std::filesystem::temp_directory_path() / "tradelab_expert.csv";
  write_expert_dataset_csv(cut, path);
  CHECK(read_expert_dataset_csv(path).size() == cut.size());
  std::filesystem::remove(path);
  CHECK(code_of([&] { generate_expert_dataset(expert, env, 0, 10); }) == Errc::EmptyDataset);
}

TEST_CASE("gail training") {
  const auto data = small_data();
  auto env = make_train_env(data, small_env());
  Rng rng(4);
  const auto expert_policy = GaussianPolicy::initialized(env.observation_dim(), 1, {8}, rng);
  const auto expert = generate_expert_dataset(expert_policy, env, 2, 1000);

  GailConfig cfg;
  cfg.hidden = {8, 8};
  cfg.timesteps_per_batch = 64;
  cfg.total_timesteps = 0;
  {
    Rng a(17), b(17);
    const auto res = gail_train(env, expert, cfg, a);
    const auto fresh = GaussianPolicy::initialized(env.observation_dim(), 1, cfg.hidden, b, cfg.initial_log_std);
    CHECK(res.iterations == 0);
    CHECK(res.policy.flat_params() == fresh.flat_params());
  }
  cfg.total_timesteps = 256;
  auto run = [&] {
    auto e = make_train_env(data, small_env());
    Rng r(23);
    return gail_train(e, expert, cfg, r);
  };
  const auto a = run();
  const auto b = run();
  CHECK(a.iterations == 4);
  CHECK(a.log.size() == 4);
  CHECK(a.policy.flat_params() == b.policy.flat_params());
  for (const auto& row : a.log) {
    CHECK(std::isfinite(row.disc_loss));
    CHECK(row.kl <= cfg.max_kl);
  }

  ExpertDataset wrong;
  wrong.pairs.push_back(ExpertPair{{1.0, 2.0}, {0.0}});
  CHECK(code_of([&] { gail_train(env, wrong, cfg, rng); }) == Errc::DimensionMismatch);
  CHECK(code_of([&] { gail_train(env, ExpertDataset{}, cfg, rng); }) == Errc::EmptyDataset);
}
