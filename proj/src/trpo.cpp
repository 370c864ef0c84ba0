#include "tradelab/trpo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tradelab/error.hpp"

namespace tradelab {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

double gaussian_lp(std::span<const double> mean, std::span<const double> log_std, std::span<const double> u) {
  double lp = 0.0;
  for (std::size_t d = 0; d < mean.size(); ++d) {
    const double z = (u[d] - mean[d]) / std::exp(log_std[d]);
    lp += standard_normal_log_density(z) - log_std[d];
  }
  return lp;
}

}  // namespace

std::vector<double> conjugate_gradient(const LinearOperator& apply, std::span<const double> b, std::size_t iters,
                                       double residual_tol) {
  std::vector<double> x(b.size(), 0.0);
  std::vector<double> r(b.begin(), b.end());
  std::vector<double> p = r;
  double rr = dot(r, r);
  for (std::size_t k = 0; k < iters && rr > residual_tol; ++k) {
    const auto ap = apply(p);
    const double pap = dot(p, ap);
    if (!(pap > 0.0)) break;
    const double step = rr / pap;
    for (std::size_t i = 0; i < x.size(); ++i) {
      x[i] += step * p[i];
      r[i] -= step * ap[i];
    }
    const double rr_new = dot(r, r);
    const double beta = rr_new / rr;
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = r[i] + beta * p[i];
    rr = rr_new;
  }
  return x;
}

double mean_kl(std::span<const std::vector<double>> old_means, std::span<const double> old_log_std,
               const GaussianPolicy& policy, std::span<const Transition> steps) {
  if (steps.empty()) return 0.0;
  double total = 0.0;
  const auto new_log_std = policy.log_std();
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const auto mu = policy.mean(steps[i].obs);
    for (std::size_t d = 0; d < mu.size(); ++d) {
      const double var_old = std::exp(2.0 * old_log_std[d]);
      const double var_new = std::exp(2.0 * new_log_std[d]);
      const double diff = old_means[i][d] - mu[d];
      total += new_log_std[d] - old_log_std[d] + (var_old + diff * diff) / (2.0 * var_new) - 0.5;
    }
  }
  return total / static_cast<double>(steps.size());
}

double trpo_surrogate(const GaussianPolicy& policy, std::span<const std::vector<double>> old_means,
                      std::span<const double> old_log_std, const TrpoBatch& batch, double entropy_coef) {
  double total = 0.0;
  for (std::size_t i = 0; i < batch.steps.size(); ++i) {
    const auto& tr = batch.steps[i];
    const auto mu = policy.mean(tr.obs);
    const double lp_new = gaussian_lp(mu, policy.log_std(), tr.pre_squash);
    const double lp_old = gaussian_lp(old_means[i], old_log_std, tr.pre_squash);
    total += std::exp(lp_new - lp_old) * batch.advantages[i];
  }
  return total / static_cast<double>(batch.steps.size()) + entropy_coef * policy.entropy();
}

std::vector<double> fisher_vector_product(const GaussianPolicy& policy, std::span<const Transition> steps,
                                          std::span<const double> v) {
  const auto& net = policy.mean_net();
  const auto n_mean = net.num_params();
  const auto adim = policy.action_dim();
  if (v.size() != policy.num_params()) throw Error(Errc::ShapeMismatch, "fisher_vector_product: bad vector size");
  std::vector<double> out(v.size(), 0.0);
  if (steps.empty()) return out;
  const double inv_n = 1.0 / static_cast<double>(steps.size());
  std::span<const double> v_mean(v.data(), n_mean);
  std::span<double> out_mean(out.data(), n_mean);
  Mlp::Cache cache;
  std::vector<double> upstream(adim);
  for (const auto& tr : steps) {
    const auto jv = net.jvp(tr.obs, v_mean);
    net.forward(tr.obs, cache);
    for (std::size_t d = 0; d < adim; ++d) {
      upstream[d] = jv[d] * std::exp(-2.0 * policy.log_std()[d]) * inv_n;
    }
    net.backward(cache, upstream, out_mean);
  }
  // Fisher information of a Gaussian w.r.t. its log standard deviation is 2.
  for (std::size_t d = 0; d < adim; ++d) out[n_mean + d] = 2.0 * v[n_mean + d];
  return out;
}

TrpoResult trpo_step(GaussianPolicy& policy, const TrpoBatch& batch, const TrpoConfig& config) {
  TrpoResult result;
  const auto n = batch.steps.size();
  if (n == 0) throw Error(Errc::EmptyBuffer, "trpo_step on an empty batch");
  if (batch.advantages.size() != n) throw Error(Errc::ShapeMismatch, "trpo_step: advantages do not match batch");
  if (!(config.max_kl > 0.0)) throw Error(Errc::InvalidConfig, "max_kl must be > 0");

  const auto old_params = policy.flat_params();
  const std::vector<double> old_log_std(policy.log_std().begin(), policy.log_std().end());
  std::vector<std::vector<double>> old_means;
  old_means.reserve(n);
  for (const auto& tr : batch.steps) old_means.push_back(policy.mean(tr.obs));

  // Surrogate gradient at the current parameters (ratio = 1).
  const auto& net = policy.mean_net();
  const auto n_mean = net.num_params();
  const auto adim = policy.action_dim();
  const double inv_n = 1.0 / static_cast<double>(n);
  std::vector<double> g(policy.num_params(), 0.0);
  std::span<double> g_mean(g.data(), n_mean);
  Mlp::Cache cache;
  std::vector<double> upstream(adim);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& tr = batch.steps[i];
    net.forward(tr.obs, cache);
    const double w = batch.advantages[i] * inv_n;
    for (std::size_t d = 0; d < adim; ++d) {
      const double sigma = std::exp(old_log_std[d]);
      const double z = (tr.pre_squash[d] - old_means[i][d]) / sigma;
      upstream[d] = w * z / sigma;
      g[n_mean + d] += w * (z * z - 1.0);
    }
    net.backward(cache, upstream, g_mean);
  }
  for (std::size_t d = 0; d < adim; ++d) g[n_mean + d] += config.entropy_coef;

  result.surrogate_before = trpo_surrogate(policy, old_means, old_log_std, batch, config.entropy_coef);
  result.surrogate_after = result.surrogate_before;

  const auto fvp = [&](std::span<const double> v) {
    auto out = fisher_vector_product(policy, batch.steps, v);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += config.cg_damping * v[i];
    return out;
  };
  const auto direction = conjugate_gradient(fvp, g, config.cg_iters);
  const auto fx = fvp(direction);
  const double shs = dot(direction, fx);
  const bool finite = std::all_of(direction.begin(), direction.end(), [](double x) { return std::isfinite(x); });
  if (!finite || !(shs > 0.0) || !std::isfinite(shs)) {
    result.warning = "non-finite or degenerate search direction; policy unchanged";
    return result;
  }
  const double beta = std::sqrt(2.0 * config.max_kl / shs);

  std::vector<double> trial(old_params.size());
  double fraction = 1.0;
  for (std::size_t k = 0; k < config.backtracks; ++k, fraction *= 0.5) {
    for (std::size_t i = 0; i < trial.size(); ++i) trial[i] = old_params[i] + fraction * beta * direction[i];
    policy.set_flat_params(trial);
    policy.clamp_log_std();
    const double kl = mean_kl(old_means, old_log_std, policy, batch.steps);
    const double surr = trpo_surrogate(policy, old_means, old_log_std, batch, config.entropy_coef);
    if (std::isfinite(kl) && std::isfinite(surr) && kl <= config.max_kl && surr > result.surrogate_before) {
      result.accepted = true;
      result.kl = kl;
      result.surrogate_after = surr;
      result.step_fraction = fraction;
      return result;
    }
  }
  policy.set_flat_params(old_params);
  return result;
}

}  // namespace tradelab
