#include "stormpg/algorithms.hpp"

#include <cmath>
#include <limits>

namespace stormpg {

std::string to_string(Algorithm algorithm) {
  switch (algorithm) {
    case Algorithm::storm_pg: return "storm_pg";
    case Algorithm::svrpg: return "svrpg";
    case Algorithm::srvrpg: return "srvrpg";
    case Algorithm::gpomdp: return "gpomdp";
  }
  return "unknown";
}

Algorithm parse_algorithm(const std::string& name) {
  if (name == "storm_pg" || name == "storm-pg" || name == "storm") return Algorithm::storm_pg;
  if (name == "svrpg") return Algorithm::svrpg;
  if (name == "srvrpg") return Algorithm::srvrpg;
  if (name == "gpomdp") return Algorithm::gpomdp;
  throw ContractViolation("unknown algorithm '" + name + "'");
}

// ---------------------------------------------------------------------------
// Batches

double Batch::mean_return() const {
  double total = 0.0;
  for (std::size_t i = 0; i < trajectories.size(); ++i) {
    const double r = trajectories[i].undiscounted_return();
    total += weights.empty() ? r : weights[i] * r;
  }
  return weights.empty() ? total / static_cast<double>(trajectories.size()) : total;
}

double Batch::mean_discounted_return(double gamma) const {
  double total = 0.0;
  for (std::size_t i = 0; i < trajectories.size(); ++i) {
    const double r = discounted_return(trajectories[i], gamma);
    total += weights.empty() ? r : weights[i] * r;
  }
  return weights.empty() ? total / static_cast<double>(trajectories.size()) : total;
}

BatchSampler rollout_sampler(const Environment& env, int jobs) {
  std::shared_ptr<const Environment> prototype = env.clone();
  return [prototype, jobs](const Policy& behavior, int n, std::uint64_t key) {
    return Batch{batch_rollout(*prototype, behavior, n, key, jobs), {}};
  };
}

namespace {

BaselineSpec baseline_for(const AlgorithmConfig& config, const Batch& batch) {
  if (config.baseline == BaselineSpec::Kind::zero) return BaselineSpec::zero();
  return BaselineSpec::per_step_mean(batch.trajectories, config.gamma);
}

ParamVector mean_gpomdp(const AlgorithmConfig& config, const Batch& batch, const Policy& policy) {
  const BaselineSpec baseline = baseline_for(config, batch);
  if (batch.weights.empty())
    return batch_gpomdp(batch.trajectories, policy, config.gamma, baseline, config.jobs).vector;
  ParamVector out = ParamVector::Zero(policy.param_count());
  for (std::size_t i = 0; i < batch.trajectories.size(); ++i)
    out += batch.weights[i] * gpomdp_estimate(batch.trajectories[i], policy, config.gamma, baseline).vector;
  return out;
}

ParamVector mean_is_gpomdp(const AlgorithmConfig& config, const Batch& batch, const Policy& target,
                           const Policy& behavior) {
  const BaselineSpec baseline = baseline_for(config, batch);
  if (batch.weights.empty())
    return batch_is_gpomdp(batch.trajectories, target, behavior, config.gamma, config.is_cap,
                           baseline, config.jobs)
        .vector;
  ParamVector out = ParamVector::Zero(target.param_count());
  for (std::size_t i = 0; i < batch.trajectories.size(); ++i)
    out += batch.weights[i] * is_gpomdp_estimate(batch.trajectories[i], target, behavior,
                                                 config.gamma, config.is_cap, baseline)
                                  .vector;
  return out;
}

IterationRecord make_record(const AlgorithmState& s, const Batch& batch, int n, double gamma,
                            bool snapshot) {
  IterationRecord r;
  r.t = s.t;
  r.params = s.params;
  r.grad = s.grad;
  r.batch_size = n;
  r.cumulative_trajectories = s.cumulative_trajectories;
  r.mean_return = batch.mean_return();
  r.mean_discounted_return = batch.mean_discounted_return(gamma);
  r.grad_norm = s.grad.norm();
  r.snapshot = snapshot;
  return r;
}

nlohmann::json vec(const ParamVector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

ParamVector unvec(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const ParamVector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

void AlgorithmConfig::validate() const {
  require(gamma > 0.0 && gamma < 1.0, "gamma must lie strictly inside (0, 1)");
  require(initial_batch >= 1, "S0 must be at least 1");
  require(algorithm == Algorithm::gpomdp || batch_size >= 1, "B must be at least 1");
  require(alpha >= 0.0 && alpha <= 1.0, "alpha must lie in [0, 1]");
  require(epoch_length >= 1, "epoch length m must be at least 1");
  require(restart_period >= 0, "restart period must be non-negative");
  require(!is_cap || *is_cap > 0.0, "IS cap must be positive");
}

ParamVector storm_combine(const ParamVector& grad, const ParamVector& mean_new,
                          const ParamVector& mean_is_old, double alpha) {
  require(grad.size() == mean_new.size() && grad.size() == mean_is_old.size(),
          "STORM update dimensions differ");
  return (1.0 - alpha) * (grad - mean_is_old) + mean_new;
}

StepResult algorithm_init(const AlgorithmConfig& config, const Policy& initial_policy,
                          OptimizerState optimizer, const BatchSampler& sampler) {
  config.validate();
  const int n = config.initial_batch;
  const Batch batch = sampler(initial_policy, n, RngStream::derive_key(config.seed, 0));

  AlgorithmState s;
  s.t = 0;
  s.params = initial_policy.params();
  s.grad = mean_gpomdp(config, batch, initial_policy);
  s.snapshot_params = s.params;
  s.snapshot_grad = s.grad;
  s.inner = 0;
  s.cumulative_trajectories = n;
  s.optimizer = std::move(optimizer);
  if (!s.grad.allFinite())
    throw NumericalError("non-finite initial gradient; state: " + s.to_json().dump());
  IterationRecord record = make_record(s, batch, n, config.gamma, true);
  return {std::move(s), std::move(record)};
}

StepResult algorithm_step(const AlgorithmConfig& config, const AlgorithmState& state,
                          const Policy& architecture, const BatchSampler& sampler) {
  require(state.grad.size() == state.params.size(), "gradient and parameter dimensions differ");
  AlgorithmState s = state;
  const ParamVector step = optimizer_step(s.optimizer, state.grad);
  s.params = state.params + step;
  s.t = state.t + 1;
  if (!s.params.allFinite())
    throw NumericalError("non-finite parameters at iteration " + std::to_string(s.t) +
                         "; state: " + state.to_json().dump());

  const auto old_policy = architecture.with_params(state.params);
  const auto new_policy = architecture.with_params(s.params);
  const std::uint64_t key = RngStream::derive_key(config.seed, static_cast<std::uint64_t>(s.t));

  int n = config.batch_size;
  bool snapshot = false;
  Batch batch;
  switch (config.algorithm) {
    case Algorithm::storm_pg: {
      snapshot = config.restart_period > 0 && s.t % config.restart_period == 0;
      n = snapshot ? config.initial_batch : config.batch_size;
      batch = sampler(*new_policy, n, key);
      const ParamVector d_new = mean_gpomdp(config, batch, *new_policy);
      if (snapshot) {
        s.grad = d_new;
      } else {
        // Old parameters as target, trajectories from the new ones.
        const ParamVector d_is = mean_is_gpomdp(config, batch, *old_policy, *new_policy);
        s.grad = storm_combine(state.grad, d_new, d_is, config.alpha);
      }
      break;
    }
    case Algorithm::svrpg: {
      snapshot = state.inner + 1 >= config.epoch_length;
      n = snapshot ? config.initial_batch : config.batch_size;
      batch = sampler(*new_policy, n, key);
      const ParamVector d_new = mean_gpomdp(config, batch, *new_policy);
      if (snapshot) {
        s.grad = d_new;
        s.snapshot_params = s.params;
        s.snapshot_grad = d_new;
        s.inner = 0;
      } else {
        const auto anchor = architecture.with_params(state.snapshot_params);
        const ParamVector d_is = mean_is_gpomdp(config, batch, *anchor, *new_policy);
        s.grad = d_new - d_is + state.snapshot_grad;
        s.inner = state.inner + 1;
      }
      break;
    }
    case Algorithm::srvrpg: {
      snapshot = state.inner + 1 >= config.epoch_length;
      n = snapshot ? config.initial_batch : config.batch_size;
      batch = sampler(*new_policy, n, key);
      const ParamVector d_new = mean_gpomdp(config, batch, *new_policy);
      if (snapshot) {
        s.grad = d_new;
        s.snapshot_params = s.params;
        s.snapshot_grad = d_new;
        s.inner = 0;
      } else {
        const ParamVector d_is = mean_is_gpomdp(config, batch, *old_policy, *new_policy);
        s.grad = state.grad + d_new - d_is;
        s.inner = state.inner + 1;
      }
      break;
    }
    case Algorithm::gpomdp: {
      n = config.initial_batch;
      batch = sampler(*new_policy, n, key);
      s.grad = mean_gpomdp(config, batch, *new_policy);
      break;
    }
  }
  s.cumulative_trajectories = state.cumulative_trajectories + n;
  if (!s.grad.allFinite())
    throw NumericalError("non-finite gradient estimate at iteration " + std::to_string(s.t) +
                         "; previous state: " + state.to_json().dump());
  IterationRecord record = make_record(s, batch, n, config.gamma, snapshot);
  return {std::move(s), std::move(record)};
}

StepResult storm_init(const AlgorithmConfig& config, const Policy& initial_policy,
                      OptimizerState optimizer, const BatchSampler& sampler) {
  require(config.algorithm == Algorithm::storm_pg, "storm_init called with another algorithm");
  return algorithm_init(config, initial_policy, std::move(optimizer), sampler);
}

StepResult storm_step(const AlgorithmConfig& config, const StormState& state,
                      const Policy& architecture, const BatchSampler& sampler) {
  require(config.algorithm == Algorithm::storm_pg, "storm_step called with another algorithm");
  return algorithm_step(config, state, architecture, sampler);
}

RunHistory run_algorithm(const AlgorithmConfig& config, const Policy& initial_policy,
                         OptimizerState optimizer, const BatchSampler& sampler,
                         const StopRule& stop, const RecordObserver& observer,
                         const std::optional<AlgorithmState>& start) {
  require(stop.max_iterations >= 0 && stop.max_trajectories >= 0, "negative stop rule");
  RunHistory history;
  AlgorithmState state;
  if (start) {
    state = *start;
  } else {
    StepResult init = algorithm_init(config, initial_policy, std::move(optimizer), sampler);
    if (observer) observer(init.record, init.state);
    history.records.push_back(std::move(init.record));
    state = std::move(init.state);
  }
  const auto more = [&] {
    if (stop.max_iterations <= 0 && stop.max_trajectories <= 0) return false;
    if (stop.max_iterations > 0 && state.t >= stop.max_iterations) return false;
    if (stop.max_trajectories > 0 && state.cumulative_trajectories >= stop.max_trajectories)
      return false;
    return true;
  };
  while (more()) {
    StepResult next = algorithm_step(config, state, initial_policy, sampler);
    if (observer) observer(next.record, next.state);
    history.records.push_back(std::move(next.record));
    state = std::move(next.state);
  }
  history.final_state = std::move(state);
  return history;
}

namespace {

RunHistory run_named(Algorithm algorithm, const Environment& env, const Policy& policy, int s0,
                     int batch, int m, double eta, long iterations, std::uint64_t seed,
                     std::optional<double> cap) {
  AlgorithmConfig config;
  config.algorithm = algorithm;
  config.gamma = env.spec().gamma;
  config.initial_batch = s0;
  config.batch_size = batch;
  config.epoch_length = m;
  config.is_cap = cap;
  config.seed = seed;
  return run_algorithm(config, policy, OptimizerState::ascent(eta), rollout_sampler(env),
                       StopRule{iterations, 0});
}

}  // namespace

RunHistory svrpg_run(const Environment& env, const Policy& policy, int s0, int batch, int m,
                     double eta, long iterations, std::uint64_t seed, std::optional<double> cap) {
  return run_named(Algorithm::svrpg, env, policy, s0, batch, m, eta, iterations, seed, cap);
}

RunHistory srvrpg_run(const Environment& env, const Policy& policy, int s0, int batch, int m,
                      double eta, long iterations, std::uint64_t seed, std::optional<double> cap) {
  return run_named(Algorithm::srvrpg, env, policy, s0, batch, m, eta, iterations, seed, cap);
}

RunHistory vanilla_pg_run(const Environment& env, const Policy& policy, int batch, double eta,
                          long iterations, std::uint64_t seed) {
  return run_named(Algorithm::gpomdp, env, policy, batch, batch, 1, eta, iterations, seed,
                   std::nullopt);
}

OutputSelection select_output(const std::vector<IterationRecord>& history, RngStream& rng) {
  require(!history.empty(), "select_output needs a non-empty history");
  const auto n = history.size();
  OutputSelection out;
  out.uniform_index = std::min<std::size_t>(static_cast<std::size_t>(rng.uniform() * static_cast<double>(n)), n - 1);
  out.params = history[out.uniform_index].params;
  for (std::size_t i = 1; i < n; ++i)
    if (history[i].mean_return > history[out.best_return_index].mean_return) out.best_return_index = i;
  return out;
}

// ---------------------------------------------------------------------------
// State serialization

nlohmann::json AlgorithmState::to_json() const {
  return {{"t", t},
          {"params", vec(params)},
          {"grad", vec(grad)},
          {"snapshot_params", vec(snapshot_params)},
          {"snapshot_grad", vec(snapshot_grad)},
          {"inner", inner},
          {"cumulative_trajectories", cumulative_trajectories},
          {"optimizer", optimizer.to_json()},
          {"rng_cursor", t + 1}};
}

AlgorithmState AlgorithmState::from_json(const nlohmann::json& j) {
  AlgorithmState s;
  s.t = j.at("t").get<long>();
  s.params = unvec(j.at("params"));
  s.grad = unvec(j.at("grad"));
  s.snapshot_params = unvec(j.at("snapshot_params"));
  s.snapshot_grad = unvec(j.at("snapshot_grad"));
  s.inner = j.at("inner").get<int>();
  s.cumulative_trajectories = j.at("cumulative_trajectories").get<long>();
  s.optimizer = OptimizerState::from_json(j.at("optimizer"));
  require(s.grad.size() == s.params.size(), "checkpoint gradient and parameter sizes differ");
  return s;
}

// ---------------------------------------------------------------------------
// Theoretical parameters

void ConstantsProfile::validate() const {
  const double all[] = {score_bound, hessian_bound, reward_bound, sigma, phi, l_d, c_gamma, delta};
  for (double v : all) require(std::isfinite(v) && v > 0.0, "constants profile entries must be positive");
}

double ConstantsProfile::smoothness_constant(double hessian_bound, double reward_bound, double gamma) {
  return hessian_bound * reward_bound / ((1.0 - gamma) * (1.0 - gamma));
}

nlohmann::json ConstantsProfile::to_json() const {
  return {{"M", score_bound}, {"N", hessian_bound}, {"R", reward_bound}, {"sigma", sigma},
          {"phi", phi},       {"L_d", l_d},         {"C_gamma", c_gamma},  {"Delta", delta}};
}

ConstantsProfile ConstantsProfile::from_json(const nlohmann::json& j) {
  ConstantsProfile p;
  p.score_bound = j.value("M", p.score_bound);
  p.hessian_bound = j.value("N", p.hessian_bound);
  p.reward_bound = j.value("R", p.reward_bound);
  p.sigma = j.value("sigma", p.sigma);
  p.phi = j.value("phi", p.phi);
  if (j.contains("L_d")) {
    p.l_d = j["L_d"].get<double>();
  } else if (j.contains("gamma")) {
    p.l_d = smoothness_constant(p.hessian_bound, p.reward_bound, j["gamma"].get<double>());
  }
  p.c_gamma = j.value("C_gamma", p.c_gamma);
  p.delta = j.value("Delta", p.delta);
  return p;
}

nlohmann::json TheoreticalParams::to_json() const {
  return {{"alpha", alpha},
          {"eta", eta},
          {"S0", s0},
          {"S0_unrounded", s0_unrounded},
          {"corollary_alpha", corollary_alpha},
          {"corollary_eta", corollary_eta},
          {"T_lower_gap", t_lower_gap},
          {"T_lower_variance", t_lower_variance},
          {"T", t},
          {"IFO", ifo},
          {"c_gamma_constraint", {{"lhs_4C2eta2", c_gamma_lhs}, {"rhs_alphaB", c_gamma_rhs}, {"ok", c_gamma_constraint_ok}}},
          {"l_d_constraint", {{"lhs_4eta2Ld2", l_d_lhs}, {"rhs_alphaB", c_gamma_rhs}, {"ok", l_d_constraint_ok}}}};
}

TheoreticalParams theoretical_params(const ConstantsProfile& profile, double epsilon, int batch) {
  profile.validate();
  require(std::isfinite(epsilon) && epsilon > 0.0, "epsilon must be positive");
  require(batch >= 1, "B must be at least 1");
  const double B = batch;
  const double sigma2 = profile.sigma * profile.sigma;
  const double c2 = profile.c_gamma * profile.c_gamma;

  TheoreticalParams p;
  p.alpha = epsilon * epsilon * B / (6.0 * sigma2);
  p.c_gamma_rhs = p.alpha * B;
  // Equality case of 4 C^2 eta^2 <= alpha B, rounded toward feasibility.
  p.eta = std::sqrt(p.c_gamma_rhs / (4.0 * c2));
  while (4.0 * c2 * p.eta * p.eta > p.c_gamma_rhs) p.eta = std::nextafter(p.eta, 0.0);
  p.c_gamma_lhs = 4.0 * c2 * p.eta * p.eta;
  p.c_gamma_constraint_ok = p.c_gamma_lhs <= p.c_gamma_rhs;
  p.l_d_lhs = 4.0 * p.eta * p.eta * profile.l_d * profile.l_d;
  p.l_d_constraint_ok = p.c_gamma_rhs >= p.l_d_lhs;

  p.s0_unrounded = 2.0 * std::sqrt(3.0) / 3.0 * sigma2 / (epsilon * epsilon);
  p.s0 = static_cast<long>(std::ceil(p.s0_unrounded * (1.0 - 1e-12)));
  p.corollary_alpha = epsilon * epsilon / (6.0 * sigma2);
  p.corollary_eta = epsilon / (2.0 * std::sqrt(6.0) * profile.sigma * profile.l_d);

  const double eps3 = epsilon * epsilon * epsilon;
  p.t_lower_gap = 4.0 * std::sqrt(6.0) * profile.delta * profile.c_gamma * profile.sigma / (3.0 * eps3 * B);
  p.t_lower_variance = 4.0 * sigma2 * sigma2 / (3.0 * static_cast<double>(p.s0) * eps3 * epsilon * B);
  p.t = static_cast<long>(std::ceil(std::max(p.t_lower_gap, p.t_lower_variance)));
  p.ifo = p.s0 + p.t * batch;
  return p;
}

}  // namespace stormpg
