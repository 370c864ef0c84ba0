#include "tradelab/run_config.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "tradelab/error.hpp"

namespace tradelab {

namespace {

using nlohmann::json;

// Reads the keys of one config block and rejects anything it did not ask for.
class Block {
 public:
  Block(const json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) throw Error(Errc::InvalidConfig, "config block '" + name_ + "' must be an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw Error(Errc::InvalidConfig, name_ + "." + key + ": " + e.what());
    }
  }

  void get_nan(const char* key, double& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    const auto& v = j_.at(key);
    if (v.is_null()) {
      out = std::nan("");
    } else if (v.is_number()) {
      out = v.get<double>();
    } else {
      throw Error(Errc::InvalidConfig, name_ + "." + key + " must be a number or null");
    }
  }

  void get_optional(const char* key, std::optional<double>& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    const auto& v = j_.at(key);
    if (v.is_null()) {
      out.reset();
    } else if (v.is_number()) {
      out = v.get<double>();
    } else {
      throw Error(Errc::InvalidConfig, name_ + "." + key + " must be a number or null");
    }
  }

  const json* child(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  void finish() const {
    for (const auto& [key, _] : j_.items()) {
      if (!seen_.count(key)) throw Error(Errc::InvalidConfig, "unknown config key '" + name_ + "." + key + "'");
    }
  }

 private:
  const json& j_;
  std::string name_;
  std::set<std::string> seen_;
};

json nan_or(double v) { return std::isnan(v) ? json(nullptr) : json(v); }

}  // namespace

void RunConfig::validate() const {
  const bool has_csv = !market.csv.empty();
  const bool has_range = !market.start.empty() || !market.end.empty();
  if (has_csv == has_range) {
    throw Error(Errc::InvalidConfig, "market needs exactly one data source: csv, or start and end dates");
  }
  if (has_range && (market.start.empty() || market.end.empty())) {
    throw Error(Errc::InvalidConfig, "market.start and market.end must both be set");
  }
  interval_to_ms(market.interval);
  if (!(split > 0.0 && split < 1.0)) throw Error(Errc::InvalidConfig, "split must lie in (0, 1)");
  if (features.window == 0) throw Error(Errc::InvalidConfig, "features.window must be >= 1");
  env.validate();
  if (algo != "ppo" && algo != "sac" && algo != "gail") {
    throw Error(Errc::InvalidConfig, "algo must be ppo, sac or gail (got '" + algo + "')");
  }
  ppo.validate();
  sac.validate();
  gail.validate();
}

RunConfig run_config_from_json(const json& j) {
  RunConfig c;
  Block root(j, "config");
  if (const auto* m = root.child("market")) {
    Block b(*m, "market");
    b.get("symbol", c.market.symbol);
    b.get("interval", c.market.interval);
    b.get("csv", c.market.csv);
    b.get("start", c.market.start);
    b.get("end", c.market.end);
    b.get("host", c.market.host);
    b.finish();
  }
  root.get("split", c.split);
  if (const auto* f = root.child("features")) {
    Block b(*f, "features");
    b.get("columns", c.features.columns);
    b.get("cci_fast", c.features.cci_fast);
    b.get("cci_slow", c.features.cci_slow);
    b.get("rsi_fast", c.features.rsi_fast);
    b.get("rsi_slow", c.features.rsi_slow);
    b.get("dmi_period", c.features.dmi_period);
    b.get("atr_period", c.features.atr_period);
    b.get("boll_n", c.features.boll_n);
    b.get("boll_m", c.features.boll_m);
    b.get("window", c.features.window);
    b.finish();
  }
  if (const auto* e = root.child("env")) {
    Block b(*e, "env");
    b.get("initial_balance", c.env.initial_balance);
    b.get_optional("max_buy_amount", c.env.max_buy_amount);
    b.get("fee_rate", c.env.fee_rate);
    b.get("reward_scale", c.env.reward_scale);
    b.get("violation_penalty", c.env.violation_penalty);
    b.finish();
  }
  root.get("algo", c.algo);
  if (const auto* p = root.child("ppo")) {
    Block b(*p, "ppo");
    b.get("gamma", c.ppo.gamma);
    b.get("gae_lambda", c.ppo.gae_lambda);
    b.get("clip_range", c.ppo.clip_range);
    b.get("ent_coef", c.ppo.ent_coef);
    b.get("learning_rate", c.ppo.learning_rate);
    b.get("n_steps", c.ppo.n_steps);
    b.get("total_timesteps", c.ppo.total_timesteps);
    b.get("n_epochs", c.ppo.n_epochs);
    b.get("minibatch_size", c.ppo.minibatch_size);
    b.get("vf_coef", c.ppo.vf_coef);
    b.get("max_grad_norm", c.ppo.max_grad_norm);
    b.get("initial_log_std", c.ppo.initial_log_std);
    b.get("hidden", c.ppo.hidden);
    b.finish();
  }
  if (const auto* s = root.child("sac")) {
    Block b(*s, "sac");
    b.get("gamma", c.sac.gamma);
    b.get("learning_rate", c.sac.learning_rate);
    b.get("buffer_size", c.sac.buffer_size);
    b.get("batch_size", c.sac.batch_size);
    b.get("initial_alpha", c.sac.initial_alpha);
    b.get("auto_alpha", c.sac.auto_alpha);
    b.get_nan("target_entropy", c.sac.target_entropy);
    b.get("learning_starts", c.sac.learning_starts);
    b.get("tau", c.sac.tau);
    b.get("total_timesteps", c.sac.total_timesteps);
    b.get("initial_log_std", c.sac.initial_log_std);
    b.get("hidden", c.sac.hidden);
    b.finish();
  }
  if (const auto* g = root.child("gail")) {
    Block b(*g, "gail");
    b.get("gamma", c.gail.gamma);
    b.get("gae_lambda", c.gail.gae_lambda);
    b.get("entropy_weight", c.gail.entropy_weight);
    b.get("n_expert_episodes", c.gail.n_expert_episodes);
    b.get("traj_limitation", c.gail.traj_limitation);
    b.get("disc_learning_rate", c.gail.disc_learning_rate);
    b.get("disc_steps", c.gail.disc_steps);
    b.get("max_kl", c.gail.max_kl);
    b.get("cg_iters", c.gail.cg_iters);
    b.get("backtracks", c.gail.backtracks);
    b.get("cg_damping", c.gail.cg_damping);
    b.get("timesteps_per_batch", c.gail.timesteps_per_batch);
    b.get("total_timesteps", c.gail.total_timesteps);
    b.get("value_learning_rate", c.gail.value_learning_rate);
    b.get("value_epochs", c.gail.value_epochs);
    b.get("initial_log_std", c.gail.initial_log_std);
    b.get("hidden", c.gail.hidden);
    b.get("expert_checkpoint", c.expert_checkpoint);
    b.finish();
  }
  root.get("seed", c.seed);
  root.finish();
  c.env.window = c.features.window;
  return c;
}

json run_config_to_json(const RunConfig& c) {
  json j;
  j["market"] = {{"symbol", c.market.symbol}, {"interval", c.market.interval}, {"csv", c.market.csv},
                 {"start", c.market.start},   {"end", c.market.end},           {"host", c.market.host}};
  j["split"] = c.split;
  const auto& f = c.features;
  j["features"] = {{"columns", f.columns.empty() ? default_feature_columns() : f.columns},
                   {"cci_fast", f.cci_fast},
                   {"cci_slow", f.cci_slow},
                   {"rsi_fast", f.rsi_fast},
                   {"rsi_slow", f.rsi_slow},
                   {"dmi_period", f.dmi_period},
                   {"atr_period", f.atr_period},
                   {"boll_n", f.boll_n},
                   {"boll_m", f.boll_m},
                   {"window", f.window}};
  j["env"] = {{"initial_balance", c.env.initial_balance},
              {"max_buy_amount", c.env.max_buy_amount ? json(*c.env.max_buy_amount) : json(nullptr)},
              {"fee_rate", c.env.fee_rate},
              {"reward_scale", c.env.reward_scale},
              {"violation_penalty", c.env.violation_penalty}};
  j["algo"] = c.algo;
  const auto& p = c.ppo;
  j["ppo"] = {{"gamma", p.gamma},
              {"gae_lambda", p.gae_lambda},
              {"clip_range", p.clip_range},
              {"ent_coef", p.ent_coef},
              {"learning_rate", p.learning_rate},
              {"n_steps", p.n_steps},
              {"total_timesteps", p.total_timesteps},
              {"n_epochs", p.n_epochs},
              {"minibatch_size", p.minibatch_size},
              {"vf_coef", p.vf_coef},
              {"max_grad_norm", p.max_grad_norm},
              {"initial_log_std", p.initial_log_std},
              {"hidden", p.hidden}};
  const auto& s = c.sac;
  j["sac"] = {{"gamma", s.gamma},
              {"learning_rate", s.learning_rate},
              {"buffer_size", s.buffer_size},
              {"batch_size", s.batch_size},
              {"initial_alpha", s.initial_alpha},
              {"auto_alpha", s.auto_alpha},
              {"target_entropy", nan_or(s.target_entropy)},
              {"learning_starts", s.learning_starts},
              {"tau", s.tau},
              {"total_timesteps", s.total_timesteps},
              {"initial_log_std", s.initial_log_std},
              {"hidden", s.hidden}};
  const auto& g = c.gail;
  j["gail"] = {{"gamma", g.gamma},
               {"gae_lambda", g.gae_lambda},
               {"entropy_weight", g.entropy_weight},
               {"n_expert_episodes", g.n_expert_episodes},
               {"traj_limitation", g.traj_limitation},
               {"disc_learning_rate", g.disc_learning_rate},
               {"disc_steps", g.disc_steps},
               {"max_kl", g.max_kl},
               {"cg_iters", g.cg_iters},
               {"backtracks", g.backtracks},
               {"cg_damping", g.cg_damping},
               {"timesteps_per_batch", g.timesteps_per_batch},
               {"total_timesteps", g.total_timesteps},
               {"value_learning_rate", g.value_learning_rate},
               {"value_epochs", g.value_epochs},
               {"initial_log_std", g.initial_log_std},
               {"hidden", g.hidden},
               {"expert_checkpoint", c.expert_checkpoint}};
  j["seed"] = c.seed;
  return j;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(Errc::InvalidConfig, "config " + path.string() + " is not valid JSON: " + e.what());
  }
  return run_config_from_json(j);
}

std::int64_t parse_utc_date_ms(const std::string& date) {
  int y = 0;
  unsigned m = 0, d = 0;
  char tail = 0;
  if (std::sscanf(date.c_str(), "%d-%u-%u%c", &y, &m, &d, &tail) != 3) {
    throw Error(Errc::InvalidConfig, "expected YYYY-MM-DD, got '" + date + "'");
  }
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
  if (!ymd.ok()) throw Error(Errc::InvalidConfig, "invalid date '" + date + "'");
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
      std::chrono::sys_days{ymd}.time_since_epoch());
  return ms.count();
}

}  // namespace tradelab
