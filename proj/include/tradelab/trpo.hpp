#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "tradelab/neural.hpp"
#include "tradelab/rollout.hpp"

namespace tradelab {

using LinearOperator = std::function<std::vector<double>(std::span<const double>)>;

/// Solves A x = b for symmetric positive definite A given only products A v.
std::vector<double> conjugate_gradient(const LinearOperator& apply, std::span<const double> b, std::size_t iters,
                                       double residual_tol = 1e-10);

struct TrpoConfig {
  double max_kl = 0.01;
  std::size_t cg_iters = 10;
  std::size_t backtracks = 10;
  double cg_damping = 0.01;
  double entropy_coef = 0.0;
};

struct TrpoBatch {
  std::span<const Transition> steps;
  std::span<const double> advantages;
};

/// Mean over the batch of KL(old || new) between the pre-squash Gaussians.
double mean_kl(std::span<const std::vector<double>> old_means, std::span<const double> old_log_std,
               const GaussianPolicy& policy, std::span<const Transition> steps);

/// mean(exp(log_prob_new - log_prob_old) * A) + entropy_coef * H.
double trpo_surrogate(const GaussianPolicy& policy, std::span<const std::vector<double>> old_means,
                      std::span<const double> old_log_std, const TrpoBatch& batch, double entropy_coef);

/// Fisher information of the policy at its current parameters, applied to v
/// (over GaussianPolicy::flat_params()).
std::vector<double> fisher_vector_product(const GaussianPolicy& policy, std::span<const Transition> steps,
                                          std::span<const double> v);

struct TrpoResult {
  bool accepted = false;
  double kl = 0.0;
  double surrogate_before = 0.0;
  double surrogate_after = 0.0;
  double step_fraction = 0.0;
  std::string warning;
};

/// Natural-gradient step on the surrogate with a KL-constrained
/// backtracking line search. A failed search leaves the policy untouched.
TrpoResult trpo_step(GaussianPolicy& policy, const TrpoBatch& batch, const TrpoConfig& config);

}  // namespace tradelab
