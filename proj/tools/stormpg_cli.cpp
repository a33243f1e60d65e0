// stormpg: train, verify and inspect variance-reduced policy-gradient runs.

#include "stormpg/harness.hpp"
#include "stormpg/oracle.hpp"
#include "stormpg/verification.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

using namespace stormpg;

namespace {

int train(const std::string& config_path, std::optional<int> seeds, std::optional<std::uint64_t> master,
          std::optional<std::string> out, std::optional<int> select_best, std::optional<int> parallel) {
  ExperimentConfig config = ExperimentConfig::load(config_path);
  if (seeds) config.num_seeds = *seeds;
  if (master) config.master_seed = *master;
  if (out) config.output_dir = *out;
  if (select_best) config.select_best = *select_best;
  if (parallel) config.jobs = *parallel;
  const ExperimentSummary summary = cmd_train(config);
  std::cout << summary.to_json(config.select_best).dump(2) << '\n';
  for (const auto& s : summary.seeds)
    if (s.failed) std::cerr << "seed " << s.index << " failed: " << s.error << '\n';
  return 0;
}

int gradcheck(const GradcheckOptions& options, const std::string& report_path) {
  const auto results = run_gradcheck_suite(options);
  const nlohmann::json report = gradcheck_report(results);
  for (const auto& r : results)
    std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << "  statistic=" << r.statistic
              << " threshold=" << r.threshold << '\n';
  if (!report_path.empty()) std::ofstream(report_path) << report.dump(2) << '\n';
  return report["passed"].get<bool>() ? 0 : 1;
}

int trace(double alpha, int batch, int initial_batch, double eta, bool adam, long iterations,
          std::uint64_t seed, const std::string& mdp_path, const std::string& out) {
  const TabularMDP mdp = mdp_path.empty() ? default_oracle_mdp() : TabularMDP::load(mdp_path);
  AlgorithmConfig config;
  config.algorithm = Algorithm::storm_pg;
  config.gamma = kOracleGamma;
  config.initial_batch = initial_batch;
  config.batch_size = batch;
  config.alpha = alpha;
  config.seed = seed;
  const TabularEnv env(mdp, kOracleHorizon, kOracleGamma);
  const SoftmaxTabularPolicy init(mdp.num_states(), mdp.num_actions());
  const OptimizerState opt = adam ? OptimizerState::adam(eta) : OptimizerState::ascent(eta);
  const auto result = estimation_error_trace(mdp, init, config, opt,
                                             kOracleHorizon, iterations, rollout_sampler(env));
  if (!out.empty()) {
    std::ofstream o(out);
    write_trace_csv(o, result);
  }
  nlohmann::json j{{"mean_error_sq", result.mean_error_sq},
                   {"sigma_sq", result.sigma_sq},
                   {"c_gamma_sq", result.c_gamma_sq},
                   {"bound_rhs", std::isfinite(result.bound_rhs) ? nlohmann::json(result.bound_rhs)
                                                                 : nlohmann::json("inf")},
                   {"bound_holds", result.bound_holds}};
  std::cout << j.dump(2) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Variance-reduced policy gradient toolkit"};
  app.require_subcommand(1);

  auto* train_cmd = app.add_subcommand("train", "Run a multi-seed experiment");
  std::string config_path;
  std::optional<int> seeds, select_best, parallel;
  std::optional<std::uint64_t> master;
  std::optional<std::string> out_dir;
  train_cmd->add_option("--config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--seeds", seeds, "Number of seeds");
  train_cmd->add_option("--master-seed", master, "Master seed");
  train_cmd->add_option("--out", out_dir, "Output directory");
  train_cmd->add_option("--select-best", select_best, "Summarize only the K best seeds");
  train_cmd->add_option("--parallel", parallel, "Seeds run concurrently");

  auto* check_cmd = app.add_subcommand("gradcheck", "Gradient and estimator verification suite");
  GradcheckOptions options;
  std::string report_path;
  check_cmd->add_option("--seed", options.seed, "Suite seed");
  check_cmd->add_option("--samples", options.mc_samples, "Monte Carlo trajectories per estimator");
  check_cmd->add_option("--fd-cases", options.fd_cases, "Finite-difference cases per policy");
  check_cmd->add_option("--report", report_path, "Write the JSON report here");

  auto* curve_cmd = app.add_subcommand("curve", "Aggregate seed metrics into a learning curve");
  std::string curve_dir, curve_out;
  int window = 1;
  bool discounted = false;
  curve_cmd->add_option("--dir", curve_dir, "Directory with metrics_seed*.csv")->required();
  curve_cmd->add_option("--window", window, "Moving-average window (rows)")->check(CLI::PositiveNumber);
  curve_cmd->add_option("--out", curve_out, "Output CSV (stdout if omitted)");
  curve_cmd->add_flag("--discounted", discounted, "Use the discounted return column");

  auto* theory_cmd = app.add_subcommand("theory", "Step size, batch and complexity from the bound");
  ConstantsProfile profile;
  std::string profile_path;
  double epsilon = 0.1;
  int theory_batch = 1;
  bool as_json = false;
  theory_cmd->add_option("--profile", profile_path, "Constants profile (JSON)")->check(CLI::ExistingFile);
  theory_cmd->add_option("--epsilon", epsilon, "Target gradient norm")->check(CLI::PositiveNumber);
  theory_cmd->add_option("--batch", theory_batch, "Mini-batch size B")->check(CLI::PositiveNumber);
  theory_cmd->add_option("--sigma", profile.sigma, "Variance bound sigma");
  theory_cmd->add_option("--c-gamma", profile.c_gamma, "C_gamma");
  theory_cmd->add_option("--l-d", profile.l_d, "Smoothness constant L_d");
  theory_cmd->add_option("--delta", profile.delta, "Initial optimality gap");
  theory_cmd->add_flag("--json", as_json, "Print JSON");

  auto* replay_cmd = app.add_subcommand("replay", "Resume a checkpoint and re-render its metrics");
  std::string checkpoint, replay_out;
  replay_cmd->add_option("--checkpoint", checkpoint, "Checkpoint JSON")->required()->check(CLI::ExistingFile);
  replay_cmd->add_option("--out", replay_out, "Metrics CSV for the resumed rows")->required();

  auto* trace_cmd = app.add_subcommand("trace", "Exact estimation-error trace on a tabular MDP");
  double trace_alpha = 0.9, trace_eta = 0.01;
  bool trace_adam = false;
  int trace_b = 5, trace_s0 = 10;
  long trace_t = 200;
  std::uint64_t trace_seed = 0;
  std::string trace_mdp, trace_out;
  trace_cmd->add_option("--alpha", trace_alpha, "STORM alpha");
  trace_cmd->add_option("--batch", trace_b, "B");
  trace_cmd->add_option("--initial-batch", trace_s0, "S0");
  trace_cmd->add_option("--eta", trace_eta, "Step size");
  trace_cmd->add_flag("--adam", trace_adam, "Adam instead of plain ascent");
  trace_cmd->add_option("--iterations", trace_t, "Iterations");
  trace_cmd->add_option("--seed", trace_seed, "Seed");
  trace_cmd->add_option("--mdp", trace_mdp, "Tabular MDP JSON (default: built-in oracle MDP)");
  trace_cmd->add_option("--out", trace_out, "Trace CSV");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train_cmd) return train(config_path, seeds, master, out_dir, select_best, parallel);
    if (*check_cmd) return gradcheck(options, report_path);
    if (*curve_cmd) {
      const auto curve = cmd_curve(curve_dir, window, curve_out, discounted);
      if (curve_out.empty()) write_curve_csv(std::cout, curve);
      return 0;
    }
    if (*theory_cmd) {
      if (!profile_path.empty()) {
        std::ifstream in(profile_path);
        profile = ConstantsProfile::from_json(nlohmann::json::parse(in));
      }
      if (as_json)
        std::cout << theoretical_params(profile, epsilon, theory_batch).to_json().dump(2) << '\n';
      else
        std::cout << theory_report(profile, epsilon, theory_batch);
      return 0;
    }
    if (*replay_cmd) {
      const auto rows = cmd_replay(checkpoint, replay_out);
      std::cout << rows.size() << " rows written to " << replay_out << '\n';
      return 0;
    }
    if (*trace_cmd)
      return trace(trace_alpha, trace_b, trace_s0, trace_eta, trace_adam, trace_t, trace_seed, trace_mdp, trace_out);
  } catch (const ConfigError& e) {
    std::cerr << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
