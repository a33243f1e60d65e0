#include "stormpg/gradients.hpp"

#include "stormpg/parallel.hpp"

#include <algorithm>
#include <cmath>

namespace stormpg {

std::string to_string(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::reinforce: return "reinforce";
    case EstimatorKind::gpomdp: return "gpomdp";
    case EstimatorKind::gpomdp_alt: return "gpomdp_alt";
    case EstimatorKind::is_gpomdp: return "is_gpomdp";
  }
  return "unknown";
}

BaselineSpec BaselineSpec::per_step_mean(const std::vector<Trajectory>& trajs, double gamma) {
  require(!trajs.empty(), "per-step baseline needs trajectories");
  std::size_t longest = 0;
  for (const auto& t : trajs) longest = std::max(longest, t.size());
  BaselineSpec b;
  b.kind = Kind::per_step_mean;
  b.values.assign(longest, 0.0);
  for (const auto& traj : trajs) {
    double discount = 1.0;
    for (std::size_t h = 0; h < traj.size(); ++h) {
      b.values[h] += discount * traj[h].reward;
      discount *= gamma;
    }
  }
  for (auto& v : b.values) v /= static_cast<double>(trajs.size());
  return b;
}

BaselineSpec BaselineSpec::constant(std::vector<double> values) {
  BaselineSpec b;
  b.kind = Kind::per_step_mean;
  b.values = std::move(values);
  return b;
}

double BaselineSpec::at(std::size_t h) const {
  if (kind == Kind::zero) return 0.0;
  require(h < values.size(), "baseline shorter than the trajectory");
  return values[h];
}

namespace {

void require_generated_by(const Trajectory& traj, const Policy& policy) {
  require(traj.behavior_params_id() == policy.id(),
          "trajectory was generated by parameters " + format_params_id(traj.behavior_params_id()) +
              ", not " + format_params_id(policy.id()));
}

GradientEstimate make_estimate(ParamVector v, EstimatorKind kind, ParamsId target, ParamsId behavior) {
  if (!v.allFinite()) throw NumericalError("non-finite " + to_string(kind) + " estimate");
  return {std::move(v), kind, 1, target, behavior};
}

}  // namespace

Eigen::MatrixXd step_scores(const Trajectory& traj, const Policy& policy, ScoreMonitor* monitor) {
  Eigen::MatrixXd scores(policy.param_count(), static_cast<Eigen::Index>(traj.size()));
  for (std::size_t t = 0; t < traj.size(); ++t) {
    scores.col(static_cast<Eigen::Index>(t)) = policy.grad_log_prob(traj[t].state, traj[t].action);
    if (monitor) monitor->observe(scores.col(static_cast<Eigen::Index>(t)).norm());
  }
  return scores;
}

GradientEstimate reinforce_estimate(const Trajectory& traj, const Policy& policy, double gamma) {
  require_generated_by(traj, policy);
  ParamVector total = ParamVector::Zero(policy.param_count());
  for (std::size_t t = 0; t < traj.size(); ++t) total += policy.grad_log_prob(traj[t].state, traj[t].action);
  return make_estimate(total * discounted_return(traj, gamma), EstimatorKind::reinforce, policy.id(),
                       policy.id());
}

GradientEstimate gpomdp_estimate(const Trajectory& traj, const Policy& policy, double gamma,
                                 const BaselineSpec& baseline, ScoreMonitor* monitor) {
  require_generated_by(traj, policy);
  ParamVector cumulative = ParamVector::Zero(policy.param_count());
  ParamVector out = ParamVector::Zero(policy.param_count());
  double discount = 1.0;
  for (std::size_t h = 0; h < traj.size(); ++h) {
    const ParamVector score = policy.grad_log_prob(traj[h].state, traj[h].action);
    if (monitor) monitor->observe(score.norm());
    cumulative += score;
    out += cumulative * (discount * traj[h].reward - baseline.at(h));
    discount *= gamma;
  }
  return make_estimate(std::move(out), EstimatorKind::gpomdp, policy.id(), policy.id());
}

GradientEstimate gpomdp_estimate_alt(const Trajectory& traj, const Policy& policy, double gamma) {
  require_generated_by(traj, policy);
  const std::size_t n = traj.size();
  std::vector<double> discounted(n);
  double discount = 1.0;
  for (std::size_t t = 0; t < n; ++t) {
    discounted[t] = discount * traj[t].reward;
    discount *= gamma;
  }
  ParamVector out = ParamVector::Zero(policy.param_count());
  double to_go = 0.0;
  for (std::size_t h = n; h-- > 0;) {
    to_go += discounted[h];
    out += to_go * policy.grad_log_prob(traj[h].state, traj[h].action);
  }
  return make_estimate(std::move(out), EstimatorKind::gpomdp_alt, policy.id(), policy.id());
}

std::vector<double> is_weights(const Policy& target, const Policy& behavior, const Trajectory& traj,
                               std::optional<double> cap) {
  require(target.param_count() == behavior.param_count() &&
              target.describe() == behavior.describe(),
          "target and behavior policies differ in architecture");
  require(!cap || *cap > 0.0, "IS cap must be positive");
  std::vector<double> weights(traj.size());
  double log_w = 0.0;
  for (std::size_t t = 0; t < traj.size(); ++t) {
    if (target.id() != behavior.id())
      log_w += target.log_prob(traj[t].state, traj[t].action) -
               behavior.log_prob(traj[t].state, traj[t].action);
    require(std::isfinite(log_w), "non-finite IS log-ratio at step " + std::to_string(t));
    const double w = std::exp(log_w);
    weights[t] = cap ? std::min(w, *cap) : w;
  }
  return weights;
}

double is_weight(const Policy& target, const Policy& behavior, const Trajectory& traj,
                 std::size_t h, std::optional<double> cap) {
  require(h < traj.size(), "IS weight step index beyond the trajectory");
  double log_w = 0.0;
  if (target.id() != behavior.id()) {
    for (std::size_t t = 0; t <= h; ++t)
      log_w += target.log_prob(traj[t].state, traj[t].action) -
               behavior.log_prob(traj[t].state, traj[t].action);
  }
  require(std::isfinite(log_w), "non-finite IS log-ratio at step " + std::to_string(h));
  require(!cap || *cap > 0.0, "IS cap must be positive");
  const double w = std::exp(log_w);
  return cap ? std::min(w, *cap) : w;
}

GradientEstimate is_gpomdp_estimate(const Trajectory& traj, const Policy& target,
                                    const Policy& behavior, double gamma,
                                    std::optional<double> cap, const BaselineSpec& baseline) {
  require_generated_by(traj, behavior);
  const std::vector<double> weights = is_weights(target, behavior, traj, cap);
  ParamVector cumulative = ParamVector::Zero(target.param_count());
  ParamVector out = ParamVector::Zero(target.param_count());
  double discount = 1.0;
  for (std::size_t h = 0; h < traj.size(); ++h) {
    cumulative += target.grad_log_prob(traj[h].state, traj[h].action);
    out += cumulative * (weights[h] * (discount * traj[h].reward - baseline.at(h)));
    discount *= gamma;
  }
  return make_estimate(std::move(out), EstimatorKind::is_gpomdp, target.id(), behavior.id());
}

GradientEstimate batch_mean(const std::vector<GradientEstimate>& estimates) {
  require(!estimates.empty(), "batch_mean of an empty list");
  const auto& first = estimates.front();
  GradientEstimate out{ParamVector::Zero(first.vector.size()), first.kind, 0, first.target_params_id,
                       first.behavior_params_id};
  for (const auto& e : estimates) {
    require(e.kind == first.kind, "batch_mean mixes estimator kinds");
    require(e.vector.size() == first.vector.size(), "batch_mean mixes dimensions");
    out.vector += e.vector;
    out.batch_size += e.batch_size;
  }
  out.vector /= static_cast<double>(estimates.size());
  return out;
}

GradientEstimate batch_gpomdp(const std::vector<Trajectory>& trajs, const Policy& policy, double gamma,
                              const BaselineSpec& baseline, int jobs, ScoreMonitor* monitor) {
  std::vector<GradientEstimate> estimates(trajs.size());
  std::vector<ScoreMonitor> monitors(trajs.size());
  if (monitor)
    for (auto& m : monitors) m.bound = monitor->bound;
  parallel_for(trajs.size(), jobs, [&](std::size_t i) {
    estimates[i] = gpomdp_estimate(trajs[i], policy, gamma, baseline, monitor ? &monitors[i] : nullptr);
  });
  if (monitor) {
    for (const auto& m : monitors) {
      monitor->observations += m.observations;
      monitor->exceed_count += m.exceed_count;
      monitor->max_norm = std::max(monitor->max_norm, m.max_norm);
    }
  }
  return batch_mean(estimates);
}

GradientEstimate batch_is_gpomdp(const std::vector<Trajectory>& trajs, const Policy& target,
                                 const Policy& behavior, double gamma, std::optional<double> cap,
                                 const BaselineSpec& baseline, int jobs) {
  std::vector<GradientEstimate> estimates(trajs.size());
  parallel_for(trajs.size(), jobs, [&](std::size_t i) {
    estimates[i] = is_gpomdp_estimate(trajs[i], target, behavior, gamma, cap, baseline);
  });
  return batch_mean(estimates);
}

bool gpomdp_norm_bound_holds(const GradientEstimate& estimate, double score_bound,
                             double reward_bound, double gamma) {
  const double bound = score_bound * reward_bound / ((1.0 - gamma) * (1.0 - gamma));
  return estimate.vector.norm() <= bound * (1.0 + 1e-12);
}

}  // namespace stormpg
