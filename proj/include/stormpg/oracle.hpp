#pragma once

// Ground truth on finite MDPs: exhaustive trajectory enumeration gives exact
// objectives and gradients; central differences check analytic gradients.

#include "stormpg/algorithms.hpp"
#include "stormpg/environments.hpp"
#include "stormpg/policy.hpp"

#include <functional>
#include <iosfwd>
#include <vector>

namespace stormpg {

struct EnumeratedTrajectory {
  std::vector<int> states;
  std::vector<int> actions;
  double probability = 0.0;
  double discounted_return = 0.0;
};

inline constexpr long kMaxEnumeratedTrajectories = 1'000'000;

/// Every length-H state/action sequence with nonzero probability. Refuses
/// (ContractViolation) when (S*A)^H exceeds `max_count`.
std::vector<EnumeratedTrajectory> enumerate_trajectories(
    const TabularMDP& mdp, const SoftmaxTabularPolicy& policy, int horizon, double gamma,
    long max_count = kMaxEnumeratedTrajectories);

/// Trajectory view of an enumerated sequence, stamped with `behavior`.
Trajectory to_trajectory(const EnumeratedTrajectory& e, const TabularMDP& mdp, int horizon,
                         ParamsId behavior);

double exact_objective(const TabularMDP& mdp, const SoftmaxTabularPolicy& policy, double gamma,
                       int horizon);

/// Sum_tau p(tau|xi) grad log p(tau|xi) R(tau); transitions drop out of the score.
ParamVector exact_gradient(const TabularMDP& mdp, const SoftmaxTabularPolicy& policy,
                           double gamma, int horizon);

/// E || d(xi) - grad L(xi) ||^2 for the zero-baseline GPOMDP estimator.
double exact_gpomdp_variance(const TabularMDP& mdp, const SoftmaxTabularPolicy& policy,
                             double gamma, int horizon);

/// E_{tau ~ behavior} || d^{behavior}(target) - d(behavior) ||^2.
double exact_is_difference(const TabularMDP& mdp, const SoftmaxTabularPolicy& target,
                           const SoftmaxTabularPolicy& behavior, double gamma, int horizon);

struct FdResult {
  ParamVector gradient;
  /// Coordinates where f(xi +- h e_j) was not finite.
  std::vector<Eigen::Index> nonfinite_coordinates;
};

FdResult fd_gradient(const std::function<double(const ParamVector&)>& f, const ParamVector& xi,
                     double step = 1e-5);

/// Batch sampler that returns the full enumeration weighted by exact
/// probabilities; batch means become exact expectations (the B -> infinity
/// limit). The requested size and key are ignored.
BatchSampler enumeration_sampler(const TabularMDP& mdp, int horizon, double gamma);

struct ErrorTracePoint {
  long t = 0;
  double error_sq = 0.0;
  double exact_objective = 0.0;
  double grad_norm = 0.0;
};

struct EstimationErrorTrace {
  std::vector<ErrorTracePoint> points;
  double mean_error_sq = 0.0;
  /// Measured constants: max exact GPOMDP variance over visited iterates and
  /// max E||d^{xi_{t+1}}(xi_t) - d(xi_{t+1})||^2 / ||xi_{t+1} - xi_t||^2.
  double sigma_sq = 0.0;
  double c_gamma_sq = 0.0;
  /// Averaged accumulated-error bound with the measured constants.
  double bound_rhs = 0.0;
  bool bound_holds = false;
};

/// Runs the configured algorithm on the tabular MDP and logs
/// ||g_t - grad L(xi_t)||^2 against exact gradients each iteration.
EstimationErrorTrace estimation_error_trace(const TabularMDP& mdp,
                                            const SoftmaxTabularPolicy& initial_policy,
                                            const AlgorithmConfig& config,
                                            OptimizerState optimizer, int horizon,
                                            long iterations, const BatchSampler& sampler);

/// CSV: iteration,error_sq,exact_objective,grad_norm
void write_trace_csv(std::ostream& out, const EstimationErrorTrace& trace);

}  // namespace stormpg
