#pragma once

// Per-trajectory policy-gradient estimators and batch aggregation.

#include "stormpg/policy.hpp"
#include "stormpg/trajectory.hpp"

#include <optional>
#include <string>
#include <vector>

namespace stormpg {

enum class EstimatorKind { reinforce, gpomdp, gpomdp_alt, is_gpomdp };

std::string to_string(EstimatorKind kind);

struct GradientEstimate {
  ParamVector vector;
  EstimatorKind kind = EstimatorKind::gpomdp;
  int batch_size = 1;
  ParamsId target_params_id = 0;
  ParamsId behavior_params_id = 0;
};

/// Per-step constants b_h subtracted from gamma^h r_h.
struct BaselineSpec {
  enum class Kind { zero, per_step_mean };
  Kind kind = Kind::zero;
  std::vector<double> values;

  static BaselineSpec zero() { return {}; }
  /// b_h = mean over trajectories of gamma^h r_h (absent steps count as 0).
  static BaselineSpec per_step_mean(const std::vector<Trajectory>& trajs, double gamma);
  /// Explicit values; must cover every step the estimate touches.
  static BaselineSpec constant(std::vector<double> values);

  double at(std::size_t h) const;
};

/// Score of every step, one column per step.
Eigen::MatrixXd step_scores(const Trajectory& traj, const Policy& policy,
                            ScoreMonitor* monitor = nullptr);

/// (Sum_t grad log pi(a_t|s_t)) * (Sum_t gamma^t r_t)
GradientEstimate reinforce_estimate(const Trajectory& traj, const Policy& policy, double gamma);

/// Sum_h (Sum_{t<=h} grad log pi(a_t|s_t)) (gamma^h r_h - b_h)
GradientEstimate gpomdp_estimate(const Trajectory& traj, const Policy& policy, double gamma,
                                 const BaselineSpec& baseline = BaselineSpec::zero(),
                                 ScoreMonitor* monitor = nullptr);

/// Reward-to-go form: Sum_h (Sum_{t>=h} gamma^t r_t) grad log pi(a_h|s_h).
GradientEstimate gpomdp_estimate_alt(const Trajectory& traj, const Policy& policy, double gamma);

/// Truncated likelihood ratio Prod_{t<=h} pi_target(a_t|s_t) / pi_behavior(a_t|s_t),
/// accumulated in log space; min(raw, cap) when a cap is given.
double is_weight(const Policy& target, const Policy& behavior, const Trajectory& traj,
                 std::size_t h, std::optional<double> cap = std::nullopt);

/// All truncated weights w_0 .. w_{len-1} in one pass.
std::vector<double> is_weights(const Policy& target, const Policy& behavior,
                               const Trajectory& traj, std::optional<double> cap = std::nullopt);

/// Importance-weighted GPOMDP at `target` for a trajectory drawn from
/// `behavior`: Sum_h w_h (Sum_{t<=h} grad log pi_target(a_t|s_t)) (gamma^h r_h - b_h).
GradientEstimate is_gpomdp_estimate(const Trajectory& traj, const Policy& target,
                                    const Policy& behavior, double gamma,
                                    std::optional<double> cap = std::nullopt,
                                    const BaselineSpec& baseline = BaselineSpec::zero());

/// Coordinate-wise mean in list order.
GradientEstimate batch_mean(const std::vector<GradientEstimate>& estimates);

/// Mean GPOMDP over a batch, estimates computed on up to `jobs` threads.
GradientEstimate batch_gpomdp(const std::vector<Trajectory>& trajs, const Policy& policy,
                              double gamma, const BaselineSpec& baseline = BaselineSpec::zero(),
                              int jobs = 1, ScoreMonitor* monitor = nullptr);

GradientEstimate batch_is_gpomdp(const std::vector<Trajectory>& trajs, const Policy& target,
                                 const Policy& behavior, double gamma,
                                 std::optional<double> cap = std::nullopt,
                                 const BaselineSpec& baseline = BaselineSpec::zero(), int jobs = 1);

/// ||d|| <= M R / (1 - gamma)^2 with M the observed score bound.
bool gpomdp_norm_bound_holds(const GradientEstimate& estimate, double score_bound,
                             double reward_bound, double gamma);

}  // namespace stormpg
