#pragma once

// Training loops: STORM-PG, SVRPG, SRVRPG and plain GPOMDP ascent, all driven
// by one state machine, plus the theoretical parameter calculator.

#include "stormpg/gradients.hpp"
#include "stormpg/optimizer.hpp"
#include "stormpg/policy.hpp"
#include "stormpg/trajectory.hpp"

#include <json.hpp>

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace stormpg {

enum class Algorithm { storm_pg, svrpg, srvrpg, gpomdp };

std::string to_string(Algorithm algorithm);
Algorithm parse_algorithm(const std::string& name);

/// Trajectories drawn at one iterate. With empty `weights` every trajectory
/// counts 1/n; otherwise weights are exact probabilities (enumeration) and
/// batch means become expectations.
struct Batch {
  std::vector<Trajectory> trajectories;
  std::vector<double> weights;

  double mean_return() const;
  double mean_discounted_return(double gamma) const;
};

/// Draws n trajectories from `behavior` using the stream key `key`.
using BatchSampler = std::function<Batch(const Policy& behavior, int n, std::uint64_t key)>;

/// batch_rollout on a private copy of `env`.
BatchSampler rollout_sampler(const Environment& env, int jobs = 1);

struct AlgorithmConfig {
  Algorithm algorithm = Algorithm::storm_pg;
  double gamma = 0.99;
  /// S0: initial (and snapshot) batch; for gpomdp, the per-iteration batch.
  int initial_batch = 10;
  /// B: mini-batch for every non-snapshot iteration.
  int batch_size = 5;
  /// m: iterations per epoch for svrpg / srvrpg.
  int epoch_length = 1;
  /// STORM mixing coefficient.
  double alpha = 1.0;
  /// STORM only: recompute g from an S0 batch every this many iterations
  /// (0 = never). Used to line STORM up against SRVRPG.
  int restart_period = 0;
  std::optional<double> is_cap;
  BaselineSpec::Kind baseline = BaselineSpec::Kind::zero;
  std::uint64_t seed = 0;
  int jobs = 1;

  void validate() const;
};

/// Full algorithm state between iterations. For STORM-PG this is
/// (xi_t, g_t, t) plus the optimizer; snapshot fields serve svrpg.
struct AlgorithmState {
  long t = 0;
  ParamVector params;
  ParamVector grad;
  ParamVector snapshot_params;
  ParamVector snapshot_grad;
  /// Position inside the current epoch (0 = snapshot iteration).
  int inner = 0;
  long cumulative_trajectories = 0;
  OptimizerState optimizer;

  nlohmann::json to_json() const;
  static AlgorithmState from_json(const nlohmann::json& j);
};

using StormState = AlgorithmState;

/// One row per sampled batch.
struct IterationRecord {
  long t = 0;
  ParamVector params;
  ParamVector grad;
  int batch_size = 0;
  long cumulative_trajectories = 0;
  double mean_return = 0.0;
  double mean_discounted_return = 0.0;
  double grad_norm = 0.0;
  bool snapshot = false;
};

struct StepResult {
  AlgorithmState state;
  IterationRecord record;
};

/// g_{t+1} = (1 - alpha) (g_t - mean d^{xi_{t+1}}(xi_t)) + mean d(xi_{t+1})
ParamVector storm_combine(const ParamVector& grad, const ParamVector& mean_new,
                          const ParamVector& mean_is_old, double alpha);

/// Batch of S0 at xi_0 and g_0 = mean GPOMDP (every algorithm starts this way).
StepResult algorithm_init(const AlgorithmConfig& config, const Policy& initial_policy,
                          OptimizerState optimizer, const BatchSampler& sampler);

/// xi_{t+1} = xi_t + step(g_t), then a fresh batch at xi_{t+1} and g_{t+1}.
/// Throws NumericalError with a state dump if g_{t+1} is not finite.
StepResult algorithm_step(const AlgorithmConfig& config, const AlgorithmState& state,
                          const Policy& architecture, const BatchSampler& sampler);

StepResult storm_init(const AlgorithmConfig& config, const Policy& initial_policy,
                      OptimizerState optimizer, const BatchSampler& sampler);
StepResult storm_step(const AlgorithmConfig& config, const StormState& state,
                      const Policy& architecture, const BatchSampler& sampler);

struct StopRule {
  long max_iterations = 0;
  /// Stop once this many trajectories were sampled (0 = no budget).
  long max_trajectories = 0;
};

struct RunHistory {
  std::vector<IterationRecord> records;
  AlgorithmState final_state;
};

using RecordObserver = std::function<void(const IterationRecord&, const AlgorithmState&)>;

/// Runs from `start` (or from a fresh init when absent) until the stop rule.
RunHistory run_algorithm(const AlgorithmConfig& config, const Policy& initial_policy,
                         OptimizerState optimizer, const BatchSampler& sampler,
                         const StopRule& stop, const RecordObserver& observer = {},
                         const std::optional<AlgorithmState>& start = std::nullopt);

RunHistory svrpg_run(const Environment& env, const Policy& policy, int s0, int batch, int m,
                     double eta, long iterations, std::uint64_t seed,
                     std::optional<double> cap = std::nullopt);
RunHistory srvrpg_run(const Environment& env, const Policy& policy, int s0, int batch, int m,
                      double eta, long iterations, std::uint64_t seed,
                      std::optional<double> cap = std::nullopt);
RunHistory vanilla_pg_run(const Environment& env, const Policy& policy, int batch, double eta,
                          long iterations, std::uint64_t seed);

struct OutputSelection {
  std::size_t uniform_index = 0;
  ParamVector params;
  /// Iterate with the highest batch mean return (a practical alternative to
  /// the uniform draw).
  std::size_t best_return_index = 0;
};

OutputSelection select_output(const std::vector<IterationRecord>& history, RngStream& rng);

/// Problem constants for the convergence bound.
struct ConstantsProfile {
  double score_bound = 1.0;     ///< M
  double hessian_bound = 1.0;   ///< N
  double reward_bound = 1.0;    ///< R
  double sigma = 1.0;           ///< estimator standard-deviation bound
  double phi = 1.0;             ///< IS-weight variance bound
  double l_d = 1.0;             ///< N R / (1 - gamma)^2
  double c_gamma = 1.0;
  double delta = 1.0;           ///< L(xi_0) gap to the optimum

  void validate() const;
  static double smoothness_constant(double hessian_bound, double reward_bound, double gamma);
  nlohmann::json to_json() const;
  static ConstantsProfile from_json(const nlohmann::json& j);
};

struct TheoreticalParams {
  double alpha = 0.0;
  double eta = 0.0;
  long s0 = 0;
  double s0_unrounded = 0.0;
  /// Corollary-style choices expressed with L_d instead of C_gamma (B = 1).
  double corollary_alpha = 0.0;
  double corollary_eta = 0.0;
  double t_lower_gap = 0.0;
  double t_lower_variance = 0.0;
  long t = 0;
  long ifo = 0;
  /// 4 C_gamma^2 eta^2 <= alpha B
  double c_gamma_lhs = 0.0;
  double c_gamma_rhs = 0.0;
  bool c_gamma_constraint_ok = false;
  /// alpha B >= 4 eta^2 L_d^2
  double l_d_lhs = 0.0;
  bool l_d_constraint_ok = false;

  nlohmann::json to_json() const;
};

TheoreticalParams theoretical_params(const ConstantsProfile& profile, double epsilon, int batch);

}  // namespace stormpg
