#include "tradelab/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "tradelab/error.hpp"

namespace tradelab {

nlohmann::json mlp_to_json(const Mlp& net) {
  return {{"layer_sizes", net.layer_sizes()},
          {"params", std::vector<double>(net.params().begin(), net.params().end())}};
}

Mlp mlp_from_json(const nlohmann::json& j) {
  Mlp net(j.at("layer_sizes").get<std::vector<std::size_t>>());
  const auto params = j.at("params").get<std::vector<double>>();
  if (params.size() != net.num_params()) {
    throw Error(Errc::DimensionMismatch, "checkpoint parameter count does not match layer sizes");
  }
  std::copy(params.begin(), params.end(), net.params().begin());
  return net;
}

nlohmann::json normalizer_to_json(const Normalizer& n) {
  return {{"columns", n.column_names},
          {"means", n.means},
          {"stds", n.stds},
          {"fitted_on", {n.fitted_on.begin, n.fitted_on.end}}};
}

Normalizer normalizer_from_json(const nlohmann::json& j) {
  Normalizer n;
  n.column_names = j.at("columns").get<std::vector<std::string>>();
  n.means = j.at("means").get<std::vector<double>>();
  n.stds = j.at("stds").get<std::vector<double>>();
  const auto range = j.at("fitted_on").get<std::vector<std::size_t>>();
  if (range.size() != 2 || n.means.size() != n.column_names.size() || n.stds.size() != n.column_names.size()) {
    throw Error(Errc::DimensionMismatch, "malformed normalizer record");
  }
  n.fitted_on = RowRange{range[0], range[1]};
  return n;
}

nlohmann::json checkpoint_to_json(const Checkpoint& ckpt) {
  nlohmann::json j;
  j["format"] = "tradelab-checkpoint";
  j["version"] = kCheckpointVersion;
  j["algorithm"] = ckpt.algorithm;
  j["window"] = ckpt.window;
  j["policy"] = {{"mean_net", mlp_to_json(ckpt.policy.mean_net())},
                 {"log_std", std::vector<double>(ckpt.policy.log_std().begin(), ckpt.policy.log_std().end())}};
  if (ckpt.value_net) j["value_net"] = mlp_to_json(*ckpt.value_net);
  j["normalizer"] = normalizer_to_json(ckpt.normalizer);
  j["meta"] = ckpt.meta;
  return j;
}

Checkpoint checkpoint_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "tradelab-checkpoint") throw Error(Errc::IoError, "not a tradelab checkpoint");
  if (j.value("version", 0) != kCheckpointVersion) {
    throw Error(Errc::IoError, "unsupported checkpoint version " + std::to_string(j.value("version", 0)));
  }
  Checkpoint ckpt;
  ckpt.algorithm = j.at("algorithm").get<std::string>();
  ckpt.window = j.at("window").get<std::size_t>();
  ckpt.policy = GaussianPolicy(mlp_from_json(j.at("policy").at("mean_net")),
                               j.at("policy").at("log_std").get<std::vector<double>>());
  if (j.contains("value_net")) ckpt.value_net = mlp_from_json(j.at("value_net"));
  ckpt.normalizer = normalizer_from_json(j.at("normalizer"));
  ckpt.meta = j.value("meta", nlohmann::json::object());
  const auto expected = observation_size(ckpt.window, ckpt.normalizer.column_names.size());
  if (ckpt.policy.obs_dim() != expected) {
    throw Error(Errc::DimensionMismatch, "policy input " + std::to_string(ckpt.policy.obs_dim()) +
                                             " does not match window/feature layout " + std::to_string(expected));
  }
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::IoError, "cannot open " + path.string() + " for writing");
  out << checkpoint_to_json(ckpt).dump(1) << '\n';
  if (!out) throw Error(Errc::IoError, "write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open checkpoint " + path.string());
  try {
    return checkpoint_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::IoError, "malformed checkpoint " + path.string() + ": " + e.what());
  }
}

}  // namespace tradelab
