#include "tradelab/cli.hpp"

#include <algorithm>
#include <array>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>

#include <CLI11.hpp>

#include "tradelab/backtest.hpp"
#include "tradelab/checkpoint.hpp"
#include "tradelab/error.hpp"
#include "tradelab/format.hpp"
#include "tradelab/pipeline.hpp"
#include "tradelab/run_config.hpp"

namespace tradelab {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Exit {
  int code;
  std::string message;
};

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  bool force = false;
  // fetch
  std::string symbol, interval, start, end, csv;
  // train / backtest / report
  std::string algo;
  std::optional<std::size_t> timesteps;
  std::string data;
  std::string checkpoint;
};

struct Layout {
  fs::path root, data, checkpoints, logs, reports;

  explicit Layout(const fs::path& out)
      : root(out), data(out / "data"), checkpoints(out / "checkpoints"), logs(out / "logs"), reports(out / "reports") {}

  fs::path klines() const { return data / "klines.csv"; }
  fs::path expert() const { return data / "expert.csv"; }
  fs::path checkpoint(const std::string& algo) const { return checkpoints / (algo + ".json"); }
  fs::path train_log(const std::string& algo) const { return logs / (algo + "_train.csv"); }
  fs::path report_json(const std::string& algo) const { return reports / (algo + "_report.json"); }
  fs::path report_csv(const std::string& algo) const { return reports / (algo + "_report.csv"); }
  fs::path report_txt(const std::string& algo) const { return reports / (algo + "_report.txt"); }
  fs::path trades(const std::string& algo) const { return reports / (algo + "_trades.csv"); }
};

void require_file(const fs::path& path, const std::string& what) {
  if (!fs::is_regular_file(path)) throw Exit{kExitMissingInput, "missing " + what + ": " + path.string()};
}

void refuse_overwrite(std::initializer_list<fs::path> paths, bool force) {
  if (force) return;
  for (const auto& p : paths) {
    if (fs::exists(p)) throw Exit{kExitRefusedOverwrite, "refusing to overwrite " + p.string() + " (pass --force)"};
  }
}

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::IoError, "cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw Error(Errc::IoError, "write failed for " + path.string());
}

RunConfig effective_config(const Options& opt) {
  RunConfig cfg;
  if (!opt.config_path.empty()) {
    require_file(opt.config_path, "config file");
    cfg = load_run_config(opt.config_path);
  }
  if (opt.seed) cfg.seed = *opt.seed;
  if (!opt.symbol.empty()) cfg.market.symbol = opt.symbol;
  if (!opt.interval.empty()) cfg.market.interval = opt.interval;
  if (!opt.csv.empty()) {
    cfg.market.csv = opt.csv;
    cfg.market.start.clear();
    cfg.market.end.clear();
  }
  if (!opt.start.empty() || !opt.end.empty()) {
    cfg.market.csv.clear();
    if (!opt.start.empty()) cfg.market.start = opt.start;
    if (!opt.end.empty()) cfg.market.end = opt.end;
  }
  if (!opt.algo.empty()) cfg.algo = opt.algo;
  if (opt.timesteps) {
    if (cfg.algo == "ppo") cfg.ppo.total_timesteps = *opt.timesteps;
    if (cfg.algo == "sac") cfg.sac.total_timesteps = *opt.timesteps;
    if (cfg.algo == "gail") cfg.gail.total_timesteps = *opt.timesteps;
  }
  cfg.env.window = cfg.features.window;
  // Commands that only read prepared data do not need a source.
  if (cfg.market.csv.empty() && cfg.market.start.empty() && cfg.market.end.empty()) cfg.market.csv = "-";
  cfg.validate();
  if (cfg.market.csv == "-") cfg.market.csv.clear();
  return cfg;
}

void echo_config(const RunConfig& cfg, const Layout& layout) {
  write_text(layout.root / "config.json", run_config_to_json(cfg).dump(2) + "\n");
}

KlineSeries load_series(const Options& opt, const RunConfig& cfg, const Layout& layout) {
  const auto step = interval_to_ms(cfg.market.interval);
  fs::path path;
  if (!opt.data.empty()) {
    path = opt.data;
  } else if (fs::exists(layout.klines())) {
    path = layout.klines();
  } else if (!cfg.market.csv.empty()) {
    path = cfg.market.csv;
  } else {
    throw Exit{kExitMissingInput, "missing kline data: " + layout.klines().string() + " (run fetch first)"};
  }
  require_file(path, "kline data");
  return read_klines_csv(path, cfg.market.symbol, step);
}

json feature_meta(const RunConfig& cfg) { return run_config_to_json(cfg)["features"]; }

Checkpoint make_checkpoint(std::string algo, const GaussianPolicy& policy, std::optional<Mlp> value_net,
                           const PreparedData& data, const RunConfig& cfg, json extra) {
  Checkpoint c;
  c.algorithm = std::move(algo);
  c.policy = policy;
  c.value_net = std::move(value_net);
  c.normalizer = data.normalizer;
  c.window = cfg.features.window;
  c.meta = {{"seed", cfg.seed},
            {"symbol", cfg.market.symbol},
            {"interval", cfg.market.interval},
            {"features", feature_meta(cfg)},
            {"train_rows", {data.train_first, data.train_last}}};
  for (auto& [k, v] : extra.items()) c.meta[k] = v;
  return c;
}

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  std::array<std::uint64_t, 1> out{};
  seq.generate(reinterpret_cast<std::uint32_t*>(out.data()), reinterpret_cast<std::uint32_t*>(out.data()) + 2);
  return out[0];
}

// Trains and returns a checkpoint. On divergence the last good policy is
// saved before the error propagates.
Checkpoint train_ppo(const PreparedData& data, const RunConfig& cfg, const fs::path& ckpt_path, std::ostream& out,
                     std::vector<TrainLogRow>& log) {
  auto env = make_train_env(data, cfg.env);
  Rng rng(stream_seed(cfg.seed, 0));
  std::optional<PpoModel> last_good;
  std::size_t updates = 0;
  const auto report_every = std::max<std::size_t>(1, cfg.ppo.total_timesteps / cfg.ppo.n_steps / 10);
  try {
    auto result = ppo_train(env, cfg.ppo, rng, [&](const PpoModel& m, const TrainLogRow& row) {
      last_good = m;
      log.push_back(row);
      if (++updates % report_every == 0) {
        out << "ppo step " << row.step << " policy_loss " << format_double(row.policy_loss) << " kl "
            << format_double(row.kl) << '\n';
      }
    });
    return make_checkpoint("ppo", result.model.policy, result.model.value_net, data, cfg,
                           {{"updates", result.updates}, {"timesteps", cfg.ppo.total_timesteps}});
  } catch (const Error& e) {
    if (e.code() == Errc::DivergenceDetected && last_good) {
      save_checkpoint(make_checkpoint("ppo", last_good->policy, last_good->value_net, data, cfg,
                                      {{"updates", updates}, {"diverged", true}}),
                      ckpt_path);
    }
    throw;
  }
}

Checkpoint train_sac(const PreparedData& data, const RunConfig& cfg, const fs::path& ckpt_path, std::ostream& out,
                     std::vector<TrainLogRow>& log) {
  auto env = make_train_env(data, cfg.env);
  Rng rng(stream_seed(cfg.seed, 1));
  std::optional<GaussianPolicy> last_good;
  const auto log_every = std::max<std::size_t>(1, std::min<std::size_t>(1000, cfg.sac.total_timesteps / 10));
  try {
    auto result = sac_train(
        env, cfg.sac, rng,
        [&](const SacNets& n, const TrainLogRow& row) {
          last_good = n.actor;
          log.push_back(row);
          out << "sac step " << row.step << " alpha " << format_double(row.alpha) << '\n';
        },
        log_every);
    return make_checkpoint("sac", result.nets.actor, std::nullopt, data, cfg,
                           {{"updates", result.updates}, {"timesteps", cfg.sac.total_timesteps}});
  } catch (const Error& e) {
    if (e.code() == Errc::DivergenceDetected && last_good) {
      save_checkpoint(make_checkpoint("sac", *last_good, std::nullopt, data, cfg, {{"diverged", true}}), ckpt_path);
    }
    throw;
  }
}

Checkpoint train_gail(const PreparedData& data, const RunConfig& cfg, const Layout& layout, const fs::path& ckpt_path,
                      std::ostream& out, std::vector<TrainLogRow>& log) {
  Checkpoint expert;
  if (!cfg.expert_checkpoint.empty()) {
    require_file(cfg.expert_checkpoint, "expert checkpoint");
    expert = load_checkpoint(cfg.expert_checkpoint);
    out << "gail expert: " << cfg.expert_checkpoint << '\n';
  } else if (fs::exists(layout.checkpoint("ppo"))) {
    expert = load_checkpoint(layout.checkpoint("ppo"));
    out << "gail expert: " << layout.checkpoint("ppo").string() << '\n';
  } else {
    out << "gail expert: training ppo first\n";
    std::vector<TrainLogRow> ppo_log;
    expert = train_ppo(data, cfg, layout.checkpoint("ppo"), out, ppo_log);
    save_checkpoint(expert, layout.checkpoint("ppo"));
    write_train_log_csv(ppo_log, layout.train_log("ppo"));
  }
  if (expert.policy.obs_dim() != observation_size(cfg.features.window, data.features.n_cols())) {
    throw Error(Errc::DimensionMismatch, "expert checkpoint does not match the feature layout");
  }

  auto env = make_train_env(data, cfg.env);
  const auto dataset =
      generate_expert_dataset(expert.policy, env, cfg.gail.n_expert_episodes, cfg.gail.traj_limitation);
  write_expert_dataset_csv(dataset, layout.expert());
  out << "gail expert pairs: " << dataset.size() << '\n';

  Rng rng(stream_seed(cfg.seed, 2));
  std::optional<GaussianPolicy> last_good;
  try {
    auto result = gail_train(env, dataset, cfg.gail, rng, [&](const GaussianPolicy& p, const TrainLogRow& row) {
      last_good = p;
      log.push_back(row);
      out << "gail step " << row.step << " disc_loss " << format_double(row.disc_loss) << " kl "
          << format_double(row.kl) << '\n';
    });
    return make_checkpoint("gail", result.policy, result.value_net, data, cfg,
                           {{"iterations", result.iterations},
                            {"timesteps", cfg.gail.total_timesteps},
                            {"expert_pairs", dataset.size()}});
  } catch (const Error& e) {
    if (e.code() == Errc::DivergenceDetected && last_good) {
      save_checkpoint(make_checkpoint("gail", *last_good, std::nullopt, data, cfg, {{"diverged", true}}), ckpt_path);
    }
    throw;
  }
}

int cmd_fetch(const Options& opt, std::ostream& out) {
  const auto cfg = effective_config(opt);
  const Layout layout(opt.out);
  refuse_overwrite({layout.klines()}, opt.force);
  fs::create_directories(layout.data);
  KlineSeries series;
  if (!cfg.market.csv.empty()) {
    require_file(cfg.market.csv, "kline fixture");
    series = read_klines_csv(cfg.market.csv, cfg.market.symbol, interval_to_ms(cfg.market.interval));
  } else {
    KlineFetcher fetcher(make_https_transport(cfg.market.host));
    series = fetcher.fetch(cfg.market.symbol, cfg.market.interval, parse_utc_date_ms(cfg.market.start),
                           parse_utc_date_ms(cfg.market.end));
  }
  write_klines_csv(series, layout.klines());
  echo_config(cfg, layout);
  out << "wrote " << series.size() << " bars (" << utc_date(series.bars.front().open_time) << " to "
      << utc_date(series.bars.back().open_time) << ", " << series.filled_count() << " gap-filled) to "
      << layout.klines().string() << '\n';
  return kExitOk;
}

int cmd_train(const Options& opt, std::ostream& out) {
  const auto cfg = effective_config(opt);
  const Layout layout(opt.out);
  const auto ckpt_path = layout.checkpoint(cfg.algo);
  refuse_overwrite({ckpt_path, layout.train_log(cfg.algo)}, opt.force);
  if (cfg.algo == "gail") {
    refuse_overwrite({layout.expert()}, opt.force);
    if (cfg.expert_checkpoint.empty() && !fs::exists(layout.checkpoint("ppo"))) {
      refuse_overwrite({layout.train_log("ppo")}, opt.force);
    }
  }
  const auto series = load_series(opt, cfg, layout);
  const auto data = prepare_data(series, cfg.features, cfg.features.window, cfg.split);
  for (const auto& dir : {layout.data, layout.checkpoints, layout.logs}) fs::create_directories(dir);
  echo_config(cfg, layout);
  out << "training " << cfg.algo << " on bars " << data.train_first << ".." << data.train_last << " (obs dim "
      << observation_size(cfg.features.window, data.features.n_cols()) << ")\n";

  std::vector<TrainLogRow> log;
  Checkpoint ckpt;
  try {
    if (cfg.algo == "ppo") ckpt = train_ppo(data, cfg, ckpt_path, out, log);
    if (cfg.algo == "sac") ckpt = train_sac(data, cfg, ckpt_path, out, log);
    if (cfg.algo == "gail") ckpt = train_gail(data, cfg, layout, ckpt_path, out, log);
  } catch (const Error& e) {
    if (e.code() == Errc::DivergenceDetected) write_train_log_csv(log, layout.train_log(cfg.algo));
    throw;
  }
  save_checkpoint(ckpt, ckpt_path);
  write_train_log_csv(log, layout.train_log(cfg.algo));
  out << "checkpoint " << ckpt_path.string() << '\n';
  return kExitOk;
}

int cmd_backtest(const Options& opt, std::ostream& out) {
  const auto cfg = effective_config(opt);
  const Layout layout(opt.out);
  const fs::path ckpt_path = opt.checkpoint.empty() ? layout.checkpoint(cfg.algo) : fs::path(opt.checkpoint);
  require_file(ckpt_path, "checkpoint");
  const auto& a = cfg.algo;
  refuse_overwrite({layout.report_json(a), layout.report_csv(a), layout.report_txt(a), layout.trades(a)}, opt.force);

  const auto ckpt = load_checkpoint(ckpt_path);
  const auto columns = cfg.features.columns.empty() ? default_feature_columns() : cfg.features.columns;
  if (ckpt.normalizer.column_names != columns || ckpt.window != cfg.features.window) {
    throw Error(Errc::DimensionMismatch, "checkpoint " + ckpt_path.string() + " was trained on " +
                                             std::to_string(ckpt.normalizer.column_names.size()) + " features x " +
                                             std::to_string(ckpt.window) + " bars, config has " +
                                             std::to_string(columns.size()) + " x " +
                                             std::to_string(cfg.features.window));
  }
  const auto series = load_series(opt, cfg, layout);
  const auto data = prepare_data(series, cfg.features, cfg.features.window, cfg.split, ckpt.normalizer);
  auto env = make_test_env(data, cfg.env);
  const auto [report, annotated] = run_backtest(ckpt.policy, env, data.timestamps);

  fs::create_directories(layout.reports);
  echo_config(cfg, layout);
  const auto table = render_report_table(report);
  write_text(layout.report_json(a), report_to_json(report).dump(2) + "\n");
  write_text(layout.report_csv(a), report_to_csv(report));
  write_text(layout.report_txt(a), table);
  export_annotated_series(annotated, layout.trades(a));
  out << table;
  return kExitOk;
}

int cmd_report(const Options& opt, std::ostream& out) {
  const Layout layout(opt.out);
  const auto algo = opt.algo.empty() ? std::string("ppo") : opt.algo;
  const fs::path path = opt.checkpoint.empty() ? layout.report_json(algo) : fs::path(opt.checkpoint);
  require_file(path, "report");
  std::ifstream in(path);
  const auto report = report_from_json(json::parse(in));
  const auto m = evaluate_profit_metrics(report);
  out << render_report_table(report) << "Profit Ratio\t" << format_double(m.profit_ratio) << '\n'
      << "Net Profit\t" << format_double(m.net_profit) << '\n'
      << "Cost Share\t" << format_double(m.cost_share) << '\n';
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Train and backtest reinforcement-learning trading agents on exchange klines", "tradelab"};
  app.require_subcommand(1);
  Options opt;
  app.add_option("--config", opt.config_path, "JSON run configuration");
  app.add_option("--seed", opt.seed, "Random seed (overrides the config)");
  app.add_option("--out", opt.out, "Output directory")->capture_default_str();
  app.add_flag("--force", opt.force, "Overwrite existing outputs");

  auto* fetch = app.add_subcommand("fetch", "Download or import klines into <out>/data/klines.csv");
  fetch->add_option("--symbol", opt.symbol, "Trading pair, e.g. ETHUSDT");
  fetch->add_option("--interval", opt.interval, "Kline interval, e.g. 4h");
  fetch->add_option("--start", opt.start, "First UTC date (YYYY-MM-DD)");
  fetch->add_option("--end", opt.end, "End UTC date, exclusive (YYYY-MM-DD)");
  fetch->add_option("--csv", opt.csv, "Import a kline CSV instead of fetching");

  auto* train = app.add_subcommand("train", "Train an agent on the training split");
  train->add_option("--algo", opt.algo, "ppo, sac or gail");
  train->add_option("--timesteps", opt.timesteps, "Override total_timesteps of the selected algorithm");
  train->add_option("--data", opt.data, "Kline CSV (default <out>/data/klines.csv)");

  auto* backtest = app.add_subcommand("backtest", "Run a trained policy over the test split");
  backtest->add_option("--algo", opt.algo, "ppo, sac or gail");
  backtest->add_option("--checkpoint", opt.checkpoint, "Checkpoint (default <out>/checkpoints/<algo>.json)");
  backtest->add_option("--data", opt.data, "Kline CSV (default <out>/data/klines.csv)");

  auto* report = app.add_subcommand("report", "Print a saved backtest report");
  report->add_option("--algo", opt.algo, "ppo, sac or gail");
  report->add_option("--report", opt.checkpoint, "Report JSON (default <out>/reports/<algo>_report.json)");

  // Global flags are accepted after the subcommand too.
  for (auto* sub : {fetch, train, backtest, report}) sub->fallthrough();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n' << app.help();
    return kExitMissingInput;
  }

  try {
    if (fetch->parsed()) return cmd_fetch(opt, out);
    if (train->parsed()) return cmd_train(opt, out);
    if (backtest->parsed()) return cmd_backtest(opt, out);
    return cmd_report(opt, out);
  } catch (const Exit& e) {
    err << "error: " << e.message << '\n';
    return e.code;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace tradelab
