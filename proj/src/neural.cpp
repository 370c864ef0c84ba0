#include "tradelab/neural.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "tradelab/error.hpp"

namespace tradelab {

namespace {

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

void check_dim(std::size_t got, std::size_t want, const char* what) {
  if (got != want) {
    throw Error(Errc::DimensionMismatch,
                std::string(what) + ": expected " + std::to_string(want) + ", got " + std::to_string(got));
  }
}

}  // namespace

Mlp::Mlp(std::vector<std::size_t> layer_sizes) : sizes_(std::move(layer_sizes)) {
  if (sizes_.size() < 2) throw Error(Errc::InvalidConfig, "an MLP needs at least input and output sizes");
  std::size_t total = 0;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    if (sizes_[l] == 0 || sizes_[l + 1] == 0) throw Error(Errc::InvalidConfig, "zero-width layer");
    offsets_.push_back(total);
    total += sizes_[l] * sizes_[l + 1] + sizes_[l + 1];
  }
  params_.assign(total, 0.0);
}

Mlp Mlp::initialized(std::vector<std::size_t> layer_sizes, Rng& rng, double output_scale) {
  Mlp net(std::move(layer_sizes));
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(net.sizes_[l]));
    std::uniform_real_distribution<double> dist(-bound, bound);
    const double scale = (l + 1 == net.num_layers()) ? output_scale : 1.0;
    const auto begin = net.offsets_[l];
    const auto end = net.bias_offset(l) + net.sizes_[l + 1];
    for (auto i = begin; i < end; ++i) net.params_[i] = dist(rng) * scale;
  }
  return net;
}

std::vector<double> Mlp::forward(std::span<const double> x) const {
  check_dim(x.size(), input_dim(), "Mlp input");
  std::vector<double> cur(x.begin(), x.end());
  std::vector<double> next;
  for (std::size_t l = 0; l < num_layers(); ++l) {
    const auto in = sizes_[l];
    const auto out = sizes_[l + 1];
    const double* w = params_.data() + offsets_[l];
    const double* b = params_.data() + bias_offset(l);
    next.assign(out, 0.0);
    for (std::size_t o = 0; o < out; ++o) {
      double acc = b[o];
      const double* row = w + o * in;
      for (std::size_t i = 0; i < in; ++i) acc += row[i] * cur[i];
      next[o] = (l + 1 < num_layers()) ? std::tanh(acc) : acc;
    }
    cur.swap(next);
  }
  return cur;
}

std::vector<double> Mlp::forward(std::span<const double> x, Cache& cache) const {
  check_dim(x.size(), input_dim(), "Mlp input");
  cache.activations.resize(sizes_.size());
  cache.activations[0].assign(x.begin(), x.end());
  for (std::size_t l = 0; l < num_layers(); ++l) {
    const auto in = sizes_[l];
    const auto out = sizes_[l + 1];
    const double* w = params_.data() + offsets_[l];
    const double* b = params_.data() + bias_offset(l);
    const auto& cur = cache.activations[l];
    auto& next = cache.activations[l + 1];
    next.assign(out, 0.0);
    for (std::size_t o = 0; o < out; ++o) {
      double acc = b[o];
      const double* row = w + o * in;
      for (std::size_t i = 0; i < in; ++i) acc += row[i] * cur[i];
      next[o] = (l + 1 < num_layers()) ? std::tanh(acc) : acc;
    }
  }
  return cache.activations.back();
}

void Mlp::backward(const Cache& cache, std::span<const double> upstream, std::span<double> grad,
                   std::vector<double>* input_grad) const {
  check_dim(upstream.size(), output_dim(), "Mlp upstream gradient");
  check_dim(grad.size(), num_params(), "Mlp gradient buffer");
  check_dim(cache.activations.size(), sizes_.size(), "Mlp cache");

  // delta holds d(loss)/d(pre-activation) of the current layer.
  std::vector<double> delta(upstream.begin(), upstream.end());
  std::vector<double> prev_delta;
  for (std::size_t l = num_layers(); l-- > 0;) {
    const auto in = sizes_[l];
    const auto out = sizes_[l + 1];
    const auto& a_in = cache.activations[l];
    const double* w = params_.data() + offsets_[l];
    double* gw = grad.data() + offsets_[l];
    double* gb = grad.data() + bias_offset(l);
    for (std::size_t o = 0; o < out; ++o) {
      const double d = delta[o];
      gb[o] += d;
      if (d == 0.0) continue;
      double* grow = gw + o * in;
      for (std::size_t i = 0; i < in; ++i) grow[i] += d * a_in[i];
    }
    if (l == 0 && input_grad == nullptr) break;
    prev_delta.assign(in, 0.0);
    for (std::size_t o = 0; o < out; ++o) {
      const double d = delta[o];
      if (d == 0.0) continue;
      const double* row = w + o * in;
      for (std::size_t i = 0; i < in; ++i) prev_delta[i] += row[i] * d;
    }
    if (l > 0) {
      for (std::size_t i = 0; i < in; ++i) prev_delta[i] *= 1.0 - a_in[i] * a_in[i];
    }
    delta.swap(prev_delta);
  }
  if (input_grad != nullptr) *input_grad = delta;
}

std::vector<double> Mlp::jvp(std::span<const double> x, std::span<const double> tangent) const {
  check_dim(x.size(), input_dim(), "Mlp input");
  check_dim(tangent.size(), num_params(), "Mlp tangent");
  std::vector<double> a(x.begin(), x.end());
  std::vector<double> da(a.size(), 0.0);
  std::vector<double> next, dnext;
  for (std::size_t l = 0; l < num_layers(); ++l) {
    const auto in = sizes_[l];
    const auto out = sizes_[l + 1];
    const double* w = params_.data() + offsets_[l];
    const double* b = params_.data() + bias_offset(l);
    const double* dw = tangent.data() + offsets_[l];
    const double* db = tangent.data() + bias_offset(l);
    next.assign(out, 0.0);
    dnext.assign(out, 0.0);
    for (std::size_t o = 0; o < out; ++o) {
      double z = b[o];
      double dz = db[o];
      const double* row = w + o * in;
      const double* drow = dw + o * in;
      for (std::size_t i = 0; i < in; ++i) {
        z += row[i] * a[i];
        dz += drow[i] * a[i] + row[i] * da[i];
      }
      if (l + 1 < num_layers()) {
        const double t = std::tanh(z);
        next[o] = t;
        dnext[o] = (1.0 - t * t) * dz;
      } else {
        next[o] = z;
        dnext[o] = dz;
      }
    }
    a.swap(next);
    da.swap(dnext);
  }
  return da;
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state) {
  if (grads.size() != params.size() || state.m.size() != params.size() || state.v.size() != params.size()) {
    throw Error(Errc::ShapeMismatch, "adam_step: params, grads and moments differ in size");
  }
  ++state.step;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
    const double m_hat = state.m[i] / bc1;
    const double v_hat = state.v[i] / bc2;
    params[i] -= state.learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
  }
}

double log_one_minus_tanh_sq(double u) { return 2.0 * (std::numbers::ln2 - u - softplus(-2.0 * u)); }

double standard_normal_log_density(double z) {
  return -0.5 * z * z - 0.5 * std::log(2.0 * std::numbers::pi);
}

GaussianPolicy::GaussianPolicy(Mlp mean_net, std::vector<double> log_std)
    : mean_net_(std::move(mean_net)), log_std_(std::move(log_std)) {
  check_dim(log_std_.size(), mean_net_.output_dim(), "log_std");
  clamp_log_std();
}

GaussianPolicy GaussianPolicy::initialized(std::size_t obs_dim, std::size_t action_dim,
                                           std::vector<std::size_t> hidden, Rng& rng, double initial_log_std) {
  std::vector<std::size_t> sizes{obs_dim};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(action_dim);
  return GaussianPolicy(Mlp::initialized(std::move(sizes), rng, 0.01),
                        std::vector<double>(action_dim, initial_log_std));
}

void GaussianPolicy::clamp_log_std() {
  for (auto& s : log_std_) s = std::clamp(s, kLogStdMin, kLogStdMax);
}

std::vector<double> GaussianPolicy::mean(std::span<const double> obs) const { return mean_net_.forward(obs); }

std::vector<double> GaussianPolicy::deterministic_action(std::span<const double> obs) const {
  auto mu = mean(obs);
  for (auto& m : mu) m = std::tanh(m);
  return mu;
}

PolicySample GaussianPolicy::sample(std::span<const double> obs, Rng& rng) const {
  std::normal_distribution<double> normal(0.0, 1.0);
  auto mu = mean(obs);
  std::vector<double> z(mu.size());
  for (auto& v : z) v = normal(rng);
  return sample_with_noise(std::move(mu), std::move(z));
}

PolicySample GaussianPolicy::sample_with_noise(std::vector<double> mean, std::vector<double> noise) const {
  check_dim(mean.size(), action_dim(), "policy mean");
  check_dim(noise.size(), action_dim(), "policy noise");
  PolicySample s;
  s.pre_squash.resize(mean.size());
  s.action.resize(mean.size());
  for (std::size_t d = 0; d < mean.size(); ++d) {
    s.pre_squash[d] = mean[d] + std::exp(log_std_[d]) * noise[d];
    s.action[d] = std::tanh(s.pre_squash[d]);
  }
  s.log_prob = log_prob(mean, s.pre_squash);
  s.mean = std::move(mean);
  s.noise = std::move(noise);
  return s;
}

double GaussianPolicy::gaussian_log_prob(std::span<const double> mean, std::span<const double> pre_squash) const {
  double lp = 0.0;
  for (std::size_t d = 0; d < mean.size(); ++d) {
    const double z = (pre_squash[d] - mean[d]) / std::exp(log_std_[d]);
    lp += standard_normal_log_density(z) - log_std_[d];
  }
  return lp;
}

double GaussianPolicy::log_prob(std::span<const double> mean, std::span<const double> pre_squash) const {
  double lp = gaussian_log_prob(mean, pre_squash);
  for (double u : pre_squash) lp -= log_one_minus_tanh_sq(u);
  return lp;
}

double GaussianPolicy::entropy() const {
  double h = 0.0;
  for (double s : log_std_) h += 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e) + s;
  return h;
}

std::vector<double> GaussianPolicy::flat_params() const {
  std::vector<double> flat(mean_net_.params().begin(), mean_net_.params().end());
  flat.insert(flat.end(), log_std_.begin(), log_std_.end());
  return flat;
}

void GaussianPolicy::set_flat_params(std::span<const double> flat) {
  check_dim(flat.size(), num_params(), "policy flat params");
  const auto n = mean_net_.num_params();
  std::copy(flat.begin(), flat.begin() + static_cast<std::ptrdiff_t>(n), mean_net_.params().begin());
  std::copy(flat.begin() + static_cast<std::ptrdiff_t>(n), flat.end(), log_std_.begin());
}

}  // namespace tradelab
