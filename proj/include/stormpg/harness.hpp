#pragma once

// Experiment configuration, multi-seed runs, metrics files and curve
// aggregation behind the command-line front end.

#include "stormpg/algorithms.hpp"
#include "stormpg/environments.hpp"
#include "stormpg/policy.hpp"

#include <json.hpp>

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace stormpg {

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> problems);
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  std::vector<std::string> problems_;
};

struct ExperimentConfig {
  Algorithm algorithm = Algorithm::storm_pg;
  /// "cartpole", "mountaincar" or "tabular" (with tabular_path).
  std::string environment = "cartpole";
  std::string tabular_path;

  /// "mlp" or "linear"
  std::string policy = "mlp";
  int hidden = 64;
  bool bias_feature = true;
  double sigma = 1.0;
  double init_scale = 0.01;

  double gamma = 0.99;
  int horizon = 100;
  double eta = 0.0;
  int batch_size = 0;
  int initial_batch = 0;
  double alpha = 1.0;
  int epoch_length = 1;
  long iterations = 0;
  long max_trajectories = 0;
  std::optional<double> is_cap;
  /// "zero" or "per_step_mean" (per-step batch mean of gamma^h r_h).
  BaselineSpec::Kind baseline = BaselineSpec::Kind::zero;
  OptimizerKind optimizer = OptimizerKind::ascent;
  double decay = 1.0;

  int num_seeds = 1;
  std::uint64_t master_seed = 0;
  std::string output_dir = "runs";
  int jobs = 1;
  int checkpoint_every = 0;
  /// Trajectories-to-threshold target; defaults to 90% of the environment's
  /// max return when that is known.
  std::optional<double> return_threshold;
  /// Window for the area-under-curve metric (0 = whole run).
  long auc_budget = 0;
  int select_best = 0;

  /// Throws ConfigError naming every missing or invalid field.
  static ExperimentConfig from_json(const nlohmann::json& j);
  static ExperimentConfig load(const std::filesystem::path& path);
  nlohmann::json to_json() const;

  AlgorithmConfig algorithm_config(std::uint64_t seed) const;
  OptimizerState optimizer_state() const;
  StopRule stop_rule() const;
};

std::unique_ptr<Environment> make_environment(const ExperimentConfig& config);
std::unique_ptr<Policy> make_initial_policy(const ExperimentConfig& config,
                                            const EnvironmentSpec& spec, std::uint64_t seed);

/// Run seed for index k of an experiment.
std::uint64_t seed_for(std::uint64_t master_seed, int index);

struct MetricsRow {
  int seed = 0;
  long iteration = 0;
  long cumulative_trajectories = 0;
  double avg_return = 0.0;
  double avg_discounted_return = 0.0;
  double grad_norm = 0.0;
};

MetricsRow to_metrics_row(int seed, const IterationRecord& record);

inline constexpr const char* kMetricsHeader =
    "seed,iteration,cumulative_trajectories,avg_return,avg_discounted_return,grad_norm";

void write_metrics_row(std::ostream& out, const MetricsRow& row);
std::vector<MetricsRow> read_metrics_csv(const std::filesystem::path& path);

/// Mean return per sampled trajectory over the first `budget` trajectories:
/// each row's batch mean covers the trajectories that batch consumed.
double area_under_curve(const std::vector<MetricsRow>& rows, long budget = 0);

/// First cumulative trajectory count whose batch mean reaches `threshold`.
std::optional<long> trajectories_to_threshold(const std::vector<MetricsRow>& rows,
                                              double threshold);

struct SeedSummary {
  int index = 0;
  std::uint64_t seed = 0;
  bool failed = false;
  std::string error;
  long iterations = 0;
  long trajectories = 0;
  double final_return = 0.0;
  double auc = 0.0;
  std::optional<long> trajectories_to_threshold;
};

struct ExperimentSummary {
  std::vector<SeedSummary> seeds;
  std::optional<double> threshold;

  /// The k best finished seeds by final return (k = 0 keeps all).
  std::vector<SeedSummary> best(int k) const;
  nlohmann::json to_json(int select_best = 0) const;
};

struct SeedRun {
  SeedSummary summary;
  std::vector<MetricsRow> rows;
};

/// One seed end to end, in memory. `out_dir` empty = no files.
SeedRun run_seed(const ExperimentConfig& config, int index,
                 const std::filesystem::path& out_dir = {});

/// Every seed; writes metrics_seed<k>.csv, timing_seed<k>.csv,
/// checkpoint_seed<k>.json and summary.json under config.output_dir.
ExperimentSummary cmd_train(const ExperimentConfig& config, bool write_files = true);

/// Continues a run from a checkpoint to the configured stop rule, writing the
/// resumed rows to `metrics_out`.
std::vector<MetricsRow> cmd_replay(const std::filesystem::path& checkpoint,
                                   const std::filesystem::path& metrics_out);

struct CurvePoint {
  long trajectories = 0;
  int seeds = 0;
  double mean = 0.0;
  double stddev = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

/// Seed curves (already smoothed or not) merged on the union of trajectory
/// counts; each seed contributes its latest row at or before the count.
/// Band = mean +- 1.96 standard errors. Order of `seeds` does not matter.
std::vector<CurvePoint> aggregate_curves(const std::vector<std::vector<MetricsRow>>& seeds,
                                         int window = 1, bool discounted = false);

/// Reads every metrics_seed*.csv under `dir` and writes the aggregated curve.
std::vector<CurvePoint> cmd_curve(const std::filesystem::path& dir, int window,
                                  const std::filesystem::path& out, bool discounted = false);

void write_curve_csv(std::ostream& out, const std::vector<CurvePoint>& curve);

/// theoretical_params plus IFO = S0 + T B, as text.
std::string theory_report(const ConstantsProfile& profile, double epsilon, int batch);

}  // namespace stormpg
