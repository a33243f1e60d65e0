#include "stormpg/oracle.hpp"

#include <cmath>
#include <limits>
#include <ostream>

namespace stormpg {

namespace {

void extend(const TabularMDP& mdp, const SoftmaxTabularPolicy& policy, int horizon, double gamma,
            EnumeratedTrajectory& current, double discount,
            std::vector<EnumeratedTrajectory>& out) {
  const int s = current.states.back();
  const Eigen::VectorXd pi = policy.probabilities(s);
  for (int a = 0; a < mdp.num_actions(); ++a) {
    if (pi(a) <= 0.0) continue;
    const double p = current.probability * pi(a);
    const double ret = current.discounted_return + discount * mdp.reward(s, a);
    current.actions.push_back(a);
    if (static_cast<int>(current.actions.size()) == horizon) {
      EnumeratedTrajectory done = current;
      done.probability = p;
      done.discounted_return = ret;
      out.push_back(std::move(done));
    } else {
      for (int next = 0; next < mdp.num_states(); ++next) {
        const double q = mdp.transition(s, a, next);
        if (q <= 0.0) continue;
        const double saved_p = current.probability;
        const double saved_r = current.discounted_return;
        current.probability = p * q;
        current.discounted_return = ret;
        current.states.push_back(next);
        extend(mdp, policy, horizon, gamma, current, discount * gamma, out);
        current.states.pop_back();
        current.probability = saved_p;
        current.discounted_return = saved_r;
      }
    }
    current.actions.pop_back();
  }
}

Eigen::VectorXd scalar(double v) { return Eigen::VectorXd::Constant(1, v); }

// Zero-baseline GPOMDP of an enumerated sequence under `policy`.
ParamVector enumerated_gpomdp(const EnumeratedTrajectory& e, const TabularMDP& mdp,
                              const SoftmaxTabularPolicy& policy, double gamma) {
  ParamVector cumulative = ParamVector::Zero(policy.param_count());
  ParamVector out = ParamVector::Zero(policy.param_count());
  double discount = 1.0;
  for (std::size_t h = 0; h < e.actions.size(); ++h) {
    cumulative += policy.grad_log_prob(scalar(e.states[h]), scalar(e.actions[h]));
    out += cumulative * (discount * mdp.reward(e.states[h], e.actions[h]));
    discount *= gamma;
  }
  return out;
}

}  // namespace

std::vector<EnumeratedTrajectory> enumerate_trajectories(const TabularMDP& mdp,
                                                         const SoftmaxTabularPolicy& policy,
                                                         int horizon, double gamma,
                                                         long max_count) {
  require(horizon >= 1, "horizon must be at least 1");
  require(policy.num_states() == mdp.num_states() && policy.num_actions() == mdp.num_actions(),
          "policy shape does not match the MDP");
  const double size = std::pow(static_cast<double>(mdp.num_states()) * mdp.num_actions(), horizon);
  if (size > static_cast<double>(max_count))
    throw ContractViolation("enumeration of (S*A)^H = " + std::to_string(size) +
                            " trajectories exceeds the limit of " + std::to_string(max_count));
  std::vector<EnumeratedTrajectory> out;
  for (int s = 0; s < mdp.num_states(); ++s) {
    if (mdp.initial(s) <= 0.0) continue;
    EnumeratedTrajectory current;
    current.states.push_back(s);
    current.probability = mdp.initial(s);
    extend(mdp, policy, horizon, gamma, current, 1.0, out);
  }
  return out;
}

Trajectory to_trajectory(const EnumeratedTrajectory& e, const TabularMDP& mdp, int horizon,
                         ParamsId behavior) {
  std::vector<StepRecord> steps;
  steps.reserve(e.actions.size());
  for (std::size_t h = 0; h < e.actions.size(); ++h)
    steps.push_back({scalar(e.states[h]), scalar(e.actions[h]), mdp.reward(e.states[h], e.actions[h])});
  return Trajectory(std::move(steps), horizon, behavior);
}

double exact_objective(const TabularMDP& mdp, const SoftmaxTabularPolicy& policy, double gamma,
                       int horizon) {
  double total = 0.0;
  for (const auto& e : enumerate_trajectories(mdp, policy, horizon, gamma))
    total += e.probability * e.discounted_return;
  return total;
}

ParamVector exact_gradient(const TabularMDP& mdp, const SoftmaxTabularPolicy& policy,
                           double gamma, int horizon) {
  ParamVector grad = ParamVector::Zero(policy.param_count());
  for (const auto& e : enumerate_trajectories(mdp, policy, horizon, gamma)) {
    ParamVector score = ParamVector::Zero(policy.param_count());
    for (std::size_t h = 0; h < e.actions.size(); ++h)
      score += policy.grad_log_prob(scalar(e.states[h]), scalar(e.actions[h]));
    grad += e.probability * e.discounted_return * score;
  }
  return grad;
}

double exact_gpomdp_variance(const TabularMDP& mdp, const SoftmaxTabularPolicy& policy,
                             double gamma, int horizon) {
  const ParamVector mean = exact_gradient(mdp, policy, gamma, horizon);
  double total = 0.0;
  for (const auto& e : enumerate_trajectories(mdp, policy, horizon, gamma))
    total += e.probability * (enumerated_gpomdp(e, mdp, policy, gamma) - mean).squaredNorm();
  return total;
}

double exact_is_difference(const TabularMDP& mdp, const SoftmaxTabularPolicy& target,
                           const SoftmaxTabularPolicy& behavior, double gamma, int horizon) {
  double total = 0.0;
  for (const auto& e : enumerate_trajectories(mdp, behavior, horizon, gamma)) {
    const Trajectory traj = to_trajectory(e, mdp, horizon, behavior.id());
    const ParamVector d_is = is_gpomdp_estimate(traj, target, behavior, gamma).vector;
    const ParamVector d = gpomdp_estimate(traj, behavior, gamma).vector;
    total += e.probability * (d_is - d).squaredNorm();
  }
  return total;
}

FdResult fd_gradient(const std::function<double(const ParamVector&)>& f, const ParamVector& xi,
                     double step) {
  require(step > 0.0 && std::isfinite(step), "finite-difference step must be positive");
  FdResult out;
  out.gradient = ParamVector::Zero(xi.size());
  ParamVector x = xi;
  for (Eigen::Index j = 0; j < xi.size(); ++j) {
    x(j) = xi(j) + step;
    const double up = f(x);
    x(j) = xi(j) - step;
    const double down = f(x);
    x(j) = xi(j);
    if (!std::isfinite(up) || !std::isfinite(down)) {
      out.nonfinite_coordinates.push_back(j);
      out.gradient(j) = std::numeric_limits<double>::quiet_NaN();
    } else {
      out.gradient(j) = (up - down) / (2.0 * step);
    }
  }
  return out;
}

BatchSampler enumeration_sampler(const TabularMDP& mdp, int horizon, double gamma) {
  return [mdp, horizon, gamma](const Policy& behavior, int, std::uint64_t) {
    const auto* softmax = dynamic_cast<const SoftmaxTabularPolicy*>(&behavior);
    require(softmax != nullptr, "enumeration sampler needs a softmax tabular policy");
    Batch batch;
    for (const auto& e : enumerate_trajectories(mdp, *softmax, horizon, gamma)) {
      batch.trajectories.push_back(to_trajectory(e, mdp, horizon, behavior.id()));
      batch.weights.push_back(e.probability);
    }
    return batch;
  };
}

EstimationErrorTrace estimation_error_trace(const TabularMDP& mdp,
                                            const SoftmaxTabularPolicy& initial_policy,
                                            const AlgorithmConfig& config,
                                            OptimizerState optimizer, int horizon,
                                            long iterations, const BatchSampler& sampler) {
  require(iterations >= 1, "trace needs at least one iteration");
  EstimationErrorTrace trace;
  const double gamma = config.gamma;
  SoftmaxTabularPolicy current = initial_policy;
  SoftmaxTabularPolicy previous = initial_policy;

  const auto record = [&](const AlgorithmState& state) {
    current.set_params(state.params);
    const ParamVector exact = exact_gradient(mdp, current, gamma, horizon);
    trace.points.push_back({state.t, (state.grad - exact).squaredNorm(),
                            exact_objective(mdp, current, gamma, horizon), state.grad.norm()});
    trace.sigma_sq = std::max(trace.sigma_sq, exact_gpomdp_variance(mdp, current, gamma, horizon));
  };

  StepResult step = algorithm_init(config, initial_policy, std::move(optimizer), sampler);
  record(step.state);
  double lr_sq_grad_sum = 0.0;
  AlgorithmState state = step.state;
  for (long t = 1; t < iterations; ++t) {
    const double lr = state.optimizer.current_lr();
    lr_sq_grad_sum += lr * lr * state.grad.squaredNorm();
    previous.set_params(state.params);
    StepResult next = algorithm_step(config, state, initial_policy, sampler);
    current.set_params(next.state.params);
    const double dist_sq = (next.state.params - state.params).squaredNorm();
    if (dist_sq > 0.0)
      trace.c_gamma_sq = std::max(
          trace.c_gamma_sq, exact_is_difference(mdp, previous, current, gamma, horizon) / dist_sq);
    state = std::move(next.state);
    record(state);
  }
  {
    const double lr = state.optimizer.current_lr();
    lr_sq_grad_sum += lr * lr * state.grad.squaredNorm();
  }

  double sum = 0.0;
  for (const auto& p : trace.points) sum += p.error_sq;
  const double T = static_cast<double>(trace.points.size());
  trace.mean_error_sq = sum / T;
  const double B = config.algorithm == Algorithm::gpomdp ? config.initial_batch : config.batch_size;
  const double alpha = config.alpha;
  if (alpha <= 0.0) {
    trace.bound_rhs = std::numeric_limits<double>::infinity();
  } else {
    trace.bound_rhs = 2.0 / (alpha * T) *
                      (trace.c_gamma_sq * lr_sq_grad_sum / B + T * alpha * alpha * trace.sigma_sq / B +
                       trace.points.front().error_sq);
  }
  trace.bound_holds = trace.mean_error_sq <= trace.bound_rhs;
  return trace;
}

void write_trace_csv(std::ostream& out, const EstimationErrorTrace& trace) {
  out << "iteration,error_sq,exact_objective,grad_norm\n";
  out.precision(17);
  for (const auto& p : trace.points)
    out << p.t << ',' << p.error_sq << ',' << p.exact_objective << ',' << p.grad_norm << '\n';
}

}  // namespace stormpg
