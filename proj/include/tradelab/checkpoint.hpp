#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "tradelab/features.hpp"
#include "tradelab/neural.hpp"

namespace tradelab {

inline constexpr int kCheckpointVersion = 1;

/// Everything inference needs: the policy, the optional critic used in
/// training, and the train-fitted feature statistics.
struct Checkpoint {
  std::string algorithm;
  GaussianPolicy policy;
  std::optional<Mlp> value_net;
  Normalizer normalizer;
  std::size_t window = 60;
  // Free-form run metadata (config echo, step counts).
  nlohmann::json meta = nlohmann::json::object();
};

nlohmann::json mlp_to_json(const Mlp& net);
Mlp mlp_from_json(const nlohmann::json& j);
nlohmann::json normalizer_to_json(const Normalizer& n);
Normalizer normalizer_from_json(const nlohmann::json& j);

nlohmann::json checkpoint_to_json(const Checkpoint& ckpt);
Checkpoint checkpoint_from_json(const nlohmann::json& j);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace tradelab
