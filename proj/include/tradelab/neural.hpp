#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace tradelab {

using Rng = std::mt19937_64;

/// Dense network with tanh hidden layers and a linear output layer.
/// Parameters live in one flat vector; layer l stores W_l (out x in,
/// row-major) followed by b_l.
class Mlp {
 public:
  struct Cache {
    // activations[0] is the input, activations.back() the output.
    std::vector<std::vector<double>> activations;
  };

  Mlp() = default;
  /// All parameters zero.
  explicit Mlp(std::vector<std::size_t> layer_sizes);

  /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and biases; the last
  /// layer is multiplied by `output_scale`.
  static Mlp initialized(std::vector<std::size_t> layer_sizes, Rng& rng, double output_scale = 1.0);

  const std::vector<std::size_t>& layer_sizes() const noexcept { return sizes_; }
  std::size_t input_dim() const noexcept { return sizes_.front(); }
  std::size_t output_dim() const noexcept { return sizes_.back(); }
  std::size_t num_layers() const noexcept { return sizes_.size() - 1; }
  std::size_t num_params() const noexcept { return params_.size(); }

  std::span<double> params() noexcept { return params_; }
  std::span<const double> params() const noexcept { return params_; }
  std::size_t weight_offset(std::size_t layer) const { return offsets_[layer]; }
  std::size_t bias_offset(std::size_t layer) const { return offsets_[layer] + sizes_[layer] * sizes_[layer + 1]; }

  std::vector<double> forward(std::span<const double> x) const;
  std::vector<double> forward(std::span<const double> x, Cache& cache) const;

  /// Reverse pass for d(loss)/d(output) = upstream. Parameter gradients are
  /// added into `grad` (size num_params()); the input gradient is written to
  /// `input_grad` when non-null.
  void backward(const Cache& cache, std::span<const double> upstream, std::span<double> grad,
                std::vector<double>* input_grad = nullptr) const;

  /// Directional derivative of the output along a parameter-space tangent.
  std::vector<double> jvp(std::span<const double> x, std::span<const double> tangent) const;

 private:
  std::vector<std::size_t> sizes_;
  std::vector<std::size_t> offsets_;
  std::vector<double> params_;
};

struct AdamState {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::int64_t step = 0;
  std::vector<double> m;
  std::vector<double> v;

  AdamState() = default;
  AdamState(std::size_t n, double lr) : learning_rate(lr), m(n, 0.0), v(n, 0.0) {}
};

/// Bias-corrected Adam update of `params` against `grads`.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state);

inline constexpr double kLogStdMin = -20.0;
inline constexpr double kLogStdMax = 2.0;

struct PolicySample {
  std::vector<double> action;      // tanh-squashed, in [-1, 1]
  std::vector<double> pre_squash;  // u = mean + std * z
  std::vector<double> noise;       // z
  std::vector<double> mean;
  double log_prob = 0.0;           // of `action`, Jacobian corrected
};

/// Diagonal Gaussian over pre-squash actions with a state-independent
/// log standard deviation, squashed through tanh.
class GaussianPolicy {
 public:
  GaussianPolicy() = default;
  GaussianPolicy(Mlp mean_net, std::vector<double> log_std);

  /// Mean network [obs, hidden..., action] with the output layer scaled by 0.01.
  static GaussianPolicy initialized(std::size_t obs_dim, std::size_t action_dim, std::vector<std::size_t> hidden,
                                    Rng& rng, double initial_log_std = 0.0);

  const Mlp& mean_net() const noexcept { return mean_net_; }
  Mlp& mean_net() noexcept { return mean_net_; }
  std::span<const double> log_std() const noexcept { return log_std_; }
  std::span<double> log_std() noexcept { return log_std_; }
  std::size_t obs_dim() const noexcept { return mean_net_.input_dim(); }
  std::size_t action_dim() const noexcept { return mean_net_.output_dim(); }

  /// Clamps every log_std entry into [kLogStdMin, kLogStdMax].
  void clamp_log_std();

  std::vector<double> mean(std::span<const double> obs) const;
  /// tanh(mean): the deterministic action.
  std::vector<double> deterministic_action(std::span<const double> obs) const;
  PolicySample sample(std::span<const double> obs, Rng& rng) const;
  /// Sample from a given mean with caller-supplied standard normal noise.
  PolicySample sample_with_noise(std::vector<double> mean, std::vector<double> noise) const;

  /// Squashed log density of the action tanh(pre_squash).
  double log_prob(std::span<const double> mean, std::span<const double> pre_squash) const;
  /// Pre-squash Gaussian log density only.
  double gaussian_log_prob(std::span<const double> mean, std::span<const double> pre_squash) const;

  double entropy() const;

  /// Flat view [mean_net params..., log_std...] for trust-region updates.
  std::size_t num_params() const noexcept { return mean_net_.num_params() + log_std_.size(); }
  std::vector<double> flat_params() const;
  void set_flat_params(std::span<const double> flat);

 private:
  Mlp mean_net_;
  std::vector<double> log_std_;
};

/// log(1 - tanh(u)^2), computed without cancellation.
double log_one_minus_tanh_sq(double u);

double standard_normal_log_density(double z);

}  // namespace tradelab
