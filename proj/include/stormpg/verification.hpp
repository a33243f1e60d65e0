#pragma once

// Gradient-check suite shared by the CLI and the test binaries.

#include "stormpg/environments.hpp"
#include "stormpg/gradients.hpp"
#include "stormpg/policy.hpp"

#include <json.hpp>

#include <memory>
#include <string>
#include <vector>

namespace stormpg {

struct CheckResult {
  std::string name;
  bool passed = false;
  /// Worst observed value of the checked quantity.
  double statistic = 0.0;
  double threshold = 0.0;
  nlohmann::json details = nlohmann::json::object();
};

/// Score vs central differences of log_prob on random (state, action, xi).
/// Per coordinate |analytic - fd| <= max(rel_tol |fd|, abs_floor).
CheckResult check_score_fd(const Policy& prototype, int cases, std::uint64_t seed,
                           double rel_tol = 1e-5, double abs_floor = 1e-8, double step = 1e-5);

/// Monte Carlo mean of an estimator vs the exact gradient: per-coordinate
/// z-scores must stay below z_max. `behavior` is only used by is_gpomdp.
CheckResult check_unbiasedness(EstimatorKind kind, const TabularMDP& mdp,
                               const SoftmaxTabularPolicy& target,
                               const SoftmaxTabularPolicy& behavior, double gamma, int horizon,
                               long samples, std::uint64_t seed, double z_max = 4.0);

/// Paired trace-of-covariance: GPOMDP strictly below REINFORCE.
CheckResult check_variance_ordering(const TabularMDP& mdp, const SoftmaxTabularPolicy& policy,
                                    double gamma, int horizon, long samples, std::uint64_t seed);

/// Both GPOMDP forms on random trajectories agree within `tol`.
CheckResult check_gpomdp_forms(const Environment& env, const Policy& prototype, int cases,
                               std::uint64_t seed, double tol = 1e-10);

/// alpha = 1 step equals a mini-batch GPOMDP step; alpha = 0 equals SARAH.
CheckResult check_storm_reductions(const TabularMDP& mdp, int horizon, double gamma,
                                   std::uint64_t seed, int steps = 20, double tol = 1e-12);

/// exact_gradient vs fd_gradient(exact_objective) on random instances.
CheckResult check_exact_gradient_fd(int instances, std::uint64_t seed, double rel_tol = 1e-7);

struct GradcheckOptions {
  int fd_cases = 100;
  long mc_samples = 100'000;
  int form_cases = 1000;
  int exact_instances = 50;
  std::uint64_t seed = 20240917;
  /// Policies for the score check; defaults to a linear and an MLP policy.
  std::vector<std::shared_ptr<const Policy>> fd_policies;
};

std::vector<CheckResult> run_gradcheck_suite(const GradcheckOptions& options);

nlohmann::json gradcheck_report(const std::vector<CheckResult>& results);

/// Target/behavior pair used by the IS unbiasedness checks.
SoftmaxTabularPolicy oracle_target_policy();
SoftmaxTabularPolicy oracle_behavior_policy();

inline constexpr int kOracleHorizon = 3;
inline constexpr double kOracleGamma = 0.9;

}  // namespace stormpg
