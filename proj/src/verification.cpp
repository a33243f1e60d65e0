#include "stormpg/verification.hpp"

#include "stormpg/algorithms.hpp"
#include "stormpg/oracle.hpp"

#include <algorithm>
#include <cmath>

namespace stormpg {

SoftmaxTabularPolicy oracle_target_policy() {
  ParamVector logits(4);
  logits << 0.4, -0.3, -0.6, 0.5;
  return SoftmaxTabularPolicy(2, 2, logits);
}

SoftmaxTabularPolicy oracle_behavior_policy() {
  ParamVector logits(4);
  logits << 0.1, 0.2, -0.2, 0.3;
  return SoftmaxTabularPolicy(2, 2, logits);
}

namespace {

ParamVector random_params(Eigen::Index n, RngStream& rng, double scale) {
  ParamVector p(n);
  for (Eigen::Index i = 0; i < n; ++i) p(i) = scale * rng.normal();
  return p;
}

Eigen::VectorXd random_state(const Policy& policy, RngStream& rng) {
  if (const auto* tab = dynamic_cast<const SoftmaxTabularPolicy*>(&policy)) {
    const int s = std::min(static_cast<int>(rng.uniform() * tab->num_states()), tab->num_states() - 1);
    return Eigen::VectorXd::Constant(1, s);
  }
  Eigen::VectorXd s(policy.state_dim());
  for (Eigen::Index i = 0; i < s.size(); ++i) s(i) = rng.normal();
  return s;
}

struct Samples {
  Eigen::MatrixXd values;  // one column per sample

  ParamVector mean() const { return values.rowwise().mean(); }
  ParamVector variance() const {
    const ParamVector m = mean();
    const double n = static_cast<double>(values.cols());
    return ((values.colwise() - m).array().square().rowwise().sum() / (n - 1.0)).matrix();
  }
};

Samples estimates(EstimatorKind kind, const std::vector<Trajectory>& trajs,
                  const SoftmaxTabularPolicy& target, const SoftmaxTabularPolicy& behavior,
                  double gamma) {
  Samples out;
  out.values.resize(target.param_count(), static_cast<Eigen::Index>(trajs.size()));
  for (std::size_t i = 0; i < trajs.size(); ++i) {
    ParamVector d;
    switch (kind) {
      case EstimatorKind::reinforce: d = reinforce_estimate(trajs[i], target, gamma).vector; break;
      case EstimatorKind::gpomdp: d = gpomdp_estimate(trajs[i], target, gamma).vector; break;
      case EstimatorKind::gpomdp_alt: d = gpomdp_estimate_alt(trajs[i], target, gamma).vector; break;
      case EstimatorKind::is_gpomdp:
        d = is_gpomdp_estimate(trajs[i], target, behavior, gamma).vector;
        break;
    }
    out.values.col(static_cast<Eigen::Index>(i)) = d;
  }
  return out;
}

nlohmann::json to_json(const ParamVector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

double max_abs_diff(const ParamVector& a, const ParamVector& b) {
  return a.size() == b.size() ? (a - b).cwiseAbs().maxCoeff() : std::numeric_limits<double>::infinity();
}

}  // namespace

CheckResult check_score_fd(const Policy& prototype, int cases, std::uint64_t seed, double rel_tol,
                           double abs_floor, double step) {
  CheckResult r;
  const nlohmann::json header = prototype.describe();
  r.name = "score_fd:" + header.value("type", std::string("policy"));
  if (header.contains("mean")) r.name += "_" + header["mean"].get<std::string>();
  r.threshold = 1.0;
  RngStream rng(seed);
  long failures = 0;
  double worst_abs = 0.0;
  for (int c = 0; c < cases; ++c) {
    const auto policy = prototype.with_params(random_params(prototype.param_count(), rng, 0.5));
    const Eigen::VectorXd state = random_state(*policy, rng);
    const Eigen::VectorXd action = policy->sample_action(state, rng);
    const ParamVector analytic = policy->grad_log_prob(state, action);
    const FdResult fd = fd_gradient(
        [&](const ParamVector& xi) { return prototype.with_params(xi)->log_prob(state, action); },
        policy->params(), step);
    if (!fd.nonfinite_coordinates.empty()) {
      ++failures;
      r.statistic = std::numeric_limits<double>::infinity();
      continue;
    }
    for (Eigen::Index j = 0; j < analytic.size(); ++j) {
      const double err = std::abs(analytic(j) - fd.gradient(j));
      const double allowed = std::max(rel_tol * std::abs(fd.gradient(j)), abs_floor);
      r.statistic = std::max(r.statistic, err / allowed);
      worst_abs = std::max(worst_abs, err);
      if (err > allowed) ++failures;
    }
  }
  r.passed = failures == 0;
  r.details = {{"cases", cases},           {"failed_coordinates", failures},
               {"max_abs_error", worst_abs}, {"rel_tol", rel_tol},
               {"abs_floor", abs_floor},   {"step", step}};
  return r;
}

CheckResult check_unbiasedness(EstimatorKind kind, const TabularMDP& mdp,
                               const SoftmaxTabularPolicy& target,
                               const SoftmaxTabularPolicy& behavior, double gamma, int horizon,
                               long samples, std::uint64_t seed, double z_max) {
  require(samples >= 2, "unbiasedness check needs at least two samples");
  CheckResult r;
  r.name = "unbiased:" + to_string(kind);
  r.threshold = z_max;
  const SoftmaxTabularPolicy& sampling = kind == EstimatorKind::is_gpomdp ? behavior : target;
  const TabularEnv env(mdp, horizon, gamma);
  const auto trajs = batch_rollout(env, sampling, static_cast<int>(samples), seed);
  const Samples s = estimates(kind, trajs, target, behavior, gamma);
  const ParamVector exact = exact_gradient(mdp, target, gamma, horizon);
  const ParamVector mean = s.mean();
  const ParamVector se = (s.variance() / static_cast<double>(samples)).cwiseSqrt();
  ParamVector z(exact.size());
  for (Eigen::Index j = 0; j < exact.size(); ++j) {
    const double diff = std::abs(mean(j) - exact(j));
    z(j) = se(j) > 0.0 ? diff / se(j) : (diff <= 1e-12 ? 0.0 : std::numeric_limits<double>::infinity());
  }
  r.statistic = z.maxCoeff();
  r.passed = r.statistic < z_max;
  r.details = {{"samples", samples}, {"z_scores", to_json(z)}, {"mc_mean", to_json(mean)},
               {"exact", to_json(exact)}, {"standard_errors", to_json(se)}};
  return r;
}

CheckResult check_variance_ordering(const TabularMDP& mdp, const SoftmaxTabularPolicy& policy,
                                    double gamma, int horizon, long samples, std::uint64_t seed) {
  CheckResult r;
  r.name = "variance_ordering";
  const TabularEnv env(mdp, horizon, gamma);
  const auto trajs = batch_rollout(env, policy, static_cast<int>(samples), seed);
  const double reinforce = estimates(EstimatorKind::reinforce, trajs, policy, policy, gamma).variance().sum();
  const double gpomdp = estimates(EstimatorKind::gpomdp, trajs, policy, policy, gamma).variance().sum();
  r.statistic = gpomdp;
  r.threshold = reinforce;
  r.passed = gpomdp < reinforce;
  r.details = {{"samples", samples}, {"trace_cov_gpomdp", gpomdp}, {"trace_cov_reinforce", reinforce}};
  return r;
}

CheckResult check_gpomdp_forms(const Environment& env, const Policy& prototype, int cases,
                               std::uint64_t seed, double tol) {
  CheckResult r;
  r.name = "gpomdp_forms";
  r.threshold = tol;
  RngStream rng(seed);
  const double gamma = env.spec().gamma;
  auto local = env.clone();
  for (int c = 0; c < cases; ++c) {
    const auto policy = prototype.with_params(random_params(prototype.param_count(), rng, 0.5));
    RngStream episode = RngStream::derive(seed, static_cast<std::uint64_t>(c));
    const Trajectory traj = rollout(*local, *policy, episode, seed, static_cast<std::uint64_t>(c));
    const ParamVector a = gpomdp_estimate(traj, *policy, gamma).vector;
    const ParamVector b = gpomdp_estimate_alt(traj, *policy, gamma).vector;
    const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
    r.statistic = std::max(r.statistic, max_abs_diff(a, b) / scale);
  }
  r.passed = r.statistic <= tol;
  r.details = {{"cases", cases}, {"environment", env.name()}, {"metric", "max |a-b| / max(1, |a|_inf)"}};
  return r;
}

CheckResult check_storm_reductions(const TabularMDP& mdp, int horizon, double gamma,
                                   std::uint64_t seed, int steps, double tol) {
  CheckResult r;
  r.name = "storm_reductions";
  r.threshold = tol;
  const TabularEnv env(mdp, horizon, gamma);
  const BatchSampler sampler = rollout_sampler(env);
  const SoftmaxTabularPolicy init(mdp.num_states(), mdp.num_actions());
  const OptimizerState opt = OptimizerState::ascent(0.1);

  // alpha = 1 against mini-batch GPOMDP with the same batch size.
  AlgorithmConfig storm;
  storm.algorithm = Algorithm::storm_pg;
  storm.gamma = gamma;
  storm.initial_batch = 5;
  storm.batch_size = 5;
  storm.alpha = 1.0;
  storm.seed = seed;
  AlgorithmConfig plain = storm;
  plain.algorithm = Algorithm::gpomdp;
  const auto a = run_algorithm(storm, init, opt, sampler, StopRule{steps, 0});
  const auto b = run_algorithm(plain, init, opt, sampler, StopRule{steps, 0});
  double alpha_one = 0.0;
  for (std::size_t i = 0; i < a.records.size(); ++i)
    alpha_one = std::max({alpha_one, max_abs_diff(a.records[i].params, b.records[i].params),
                          max_abs_diff(a.records[i].grad, b.records[i].grad)});

  // alpha = 0 against a direct SARAH recursion on the same batches.
  storm.alpha = 0.0;
  double alpha_zero = 0.0;
  StepResult cur = algorithm_init(storm, init, opt, sampler);
  for (int t = 0; t < steps; ++t) {
    const AlgorithmState& s = cur.state;
    const ParamVector next_params = s.params + 0.1 * s.grad;
    const auto old_policy = init.with_params(s.params);
    const auto new_policy = init.with_params(next_params);
    const auto batch = sampler(*new_policy, storm.batch_size,
                               RngStream::derive_key(seed, static_cast<std::uint64_t>(t + 1)));
    ParamVector sarah = s.grad;
    const double n = static_cast<double>(batch.trajectories.size());
    for (const auto& traj : batch.trajectories) {
      sarah += gpomdp_estimate(traj, *new_policy, gamma).vector / n;
      sarah -= is_gpomdp_estimate(traj, *old_policy, *new_policy, gamma).vector / n;
    }
    cur = algorithm_step(storm, s, init, sampler);
    alpha_zero = std::max({alpha_zero, max_abs_diff(cur.state.params, next_params),
                           max_abs_diff(cur.state.grad, sarah)});
  }
  r.statistic = std::max(alpha_one, alpha_zero);
  r.passed = r.statistic <= tol;
  r.details = {{"steps", steps}, {"alpha_one_max_diff", alpha_one}, {"alpha_zero_max_diff", alpha_zero}};
  return r;
}

CheckResult check_exact_gradient_fd(int instances, std::uint64_t seed, double rel_tol) {
  CheckResult r;
  r.name = "exact_gradient_fd";
  r.threshold = rel_tol;
  RngStream rng(seed);
  for (int k = 0; k < instances; ++k) {
    const int S = 2 + static_cast<int>(rng.uniform() * 2.0);
    const int A = 2 + static_cast<int>(rng.uniform() * 2.0);
    const int H = 2 + static_cast<int>(rng.uniform() * 3.0);
    const double gamma = 0.5 + 0.49 * rng.uniform();
    std::vector<std::vector<std::vector<double>>> P(S, std::vector<std::vector<double>>(A));
    std::vector<std::vector<double>> R(S, std::vector<double>(A));
    std::vector<double> rho(S);
    double rho_sum = 0.0;
    for (int s = 0; s < S; ++s) {
      rho[s] = 0.1 + rng.uniform();
      rho_sum += rho[s];
      for (int a = 0; a < A; ++a) {
        R[s][a] = 2.0 * rng.uniform() - 1.0;
        double total = 0.0;
        for (int n = 0; n < S; ++n) {
          P[s][a].push_back(0.1 + rng.uniform());
          total += P[s][a].back();
        }
        for (double& p : P[s][a]) p /= total;
      }
    }
    for (double& p : rho) p /= rho_sum;
    const TabularMDP mdp(P, R, rho);
    const SoftmaxTabularPolicy policy(S, A, random_params(S * A, rng, 1.0));
    const ParamVector exact = exact_gradient(mdp, policy, gamma, H);
    const FdResult fd = fd_gradient(
        [&](const ParamVector& xi) {
          return exact_objective(mdp, SoftmaxTabularPolicy(S, A, xi), gamma, H);
        },
        policy.params());
    const double err = (exact - fd.gradient).norm() / std::max(fd.gradient.norm(), 1e-8);
    r.statistic = std::max(r.statistic, std::isfinite(err) ? err : std::numeric_limits<double>::infinity());
  }
  r.passed = r.statistic < rel_tol;
  r.details = {{"instances", instances}, {"metric", "||exact - fd|| / ||fd||"}};
  return r;
}

std::vector<CheckResult> run_gradcheck_suite(const GradcheckOptions& options) {
  std::vector<CheckResult> results;
  RngStream seeds(options.seed);
  const auto next_seed = [&] { return seeds.next_u64(); };

  std::vector<std::shared_ptr<const Policy>> fd_policies = options.fd_policies;
  if (fd_policies.empty()) {
    GaussianPolicyConfig linear{MeanKind::linear, 4, 1, 0, true, 1.0};
    GaussianPolicyConfig mlp{MeanKind::mlp, 4, 1, 64, false, 1.0};
    fd_policies.push_back(std::make_shared<GaussianPolicy>(linear));
    fd_policies.push_back(std::make_shared<GaussianPolicy>(mlp));
    fd_policies.push_back(std::make_shared<SoftmaxTabularPolicy>(2, 2));
  }
  for (const auto& p : fd_policies) results.push_back(check_score_fd(*p, options.fd_cases, next_seed()));

  const TabularMDP mdp = default_oracle_mdp();
  const auto target = oracle_target_policy();
  const auto behavior = oracle_behavior_policy();
  for (EstimatorKind kind : {EstimatorKind::reinforce, EstimatorKind::gpomdp, EstimatorKind::is_gpomdp})
    results.push_back(check_unbiasedness(kind, mdp, target, behavior, kOracleGamma, kOracleHorizon,
                                         options.mc_samples, next_seed()));
  results.push_back(check_variance_ordering(mdp, target, kOracleGamma, kOracleHorizon,
                                            options.mc_samples, next_seed()));

  const CartPoleEnv cartpole;
  const GaussianPolicy form_policy(GaussianPolicyConfig{MeanKind::linear, 4, 1, 0, true, 1.0});
  results.push_back(check_gpomdp_forms(cartpole, form_policy, options.form_cases, next_seed()));
  results.push_back(check_storm_reductions(mdp, kOracleHorizon, kOracleGamma, next_seed()));
  results.push_back(check_exact_gradient_fd(options.exact_instances, next_seed()));
  return results;
}

nlohmann::json gradcheck_report(const std::vector<CheckResult>& results) {
  nlohmann::json checks = nlohmann::json::array();
  bool all = true;
  for (const auto& r : results) {
    all = all && r.passed;
    checks.push_back({{"name", r.name},
                      {"passed", r.passed},
                      {"statistic", r.statistic},
                      {"threshold", r.threshold},
                      {"details", r.details}});
  }
  return {{"passed", all}, {"checks", checks}};
}

}  // namespace stormpg
