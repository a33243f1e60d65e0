#include "stormpg/harness.hpp"

#include "stormpg/parallel.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace fs = std::filesystem;

namespace stormpg {

namespace {

std::string join_problems(const std::vector<std::string>& problems) {
  std::string out = "invalid experiment config:";
  for (const auto& p : problems) out += "\n  " + p;
  return out;
}

constexpr std::uint64_t kPolicyInitTag = 0xA5A5A5A5A5A5A5A5ull;

const std::set<std::string> kKnownFields = {
    "algorithm", "environment", "tabular_path", "policy", "hidden", "bias_feature", "sigma",
    "init_scale", "gamma", "horizon", "eta", "batch_size", "initial_batch", "alpha",
    "epoch_length", "iterations", "max_trajectories", "is_cap", "baseline", "optimizer", "decay",
    "num_seeds", "master_seed", "output_dir", "jobs", "checkpoint_every", "return_threshold",
    "auc_budget", "select_best"};

class FieldReader {
 public:
  explicit FieldReader(const nlohmann::json& j) : j_(j) {}

  template <typename T>
  bool read(const char* key, T& out, bool required = false) {
    if (!j_.contains(key)) {
      if (required) problems.push_back(std::string("missing required field '") + key + "'");
      return false;
    }
    try {
      out = j_.at(key).get<T>();
      return true;
    } catch (const nlohmann::json::exception&) {
      problems.push_back(std::string("field '") + key + "' has the wrong type (" +
                         j_.at(key).dump() + ")");
      return false;
    }
  }

  void check(bool ok, const std::string& message) {
    if (!ok) problems.push_back(message);
  }

  std::vector<std::string> problems;

 private:
  const nlohmann::json& j_;
};

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> problems)
    : std::runtime_error(join_problems(problems)), problems_(std::move(problems)) {}

// ---------------------------------------------------------------------------
// Config

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError({"config must be a JSON object"});
  ExperimentConfig c;
  FieldReader r(j);
  for (const auto& item : j.items())
    r.check(kKnownFields.count(item.key()) > 0, "unknown field '" + item.key() + "'");

  std::string algorithm;
  if (r.read("algorithm", algorithm, true)) {
    try {
      c.algorithm = parse_algorithm(algorithm);
    } catch (const ContractViolation&) {
      r.problems.push_back("field 'algorithm': unknown value '" + algorithm +
                           "' (storm_pg, svrpg, srvrpg, gpomdp)");
    }
  }
  if (r.read("environment", c.environment, true))
    r.check(c.environment == "cartpole" || c.environment == "mountaincar" || c.environment == "tabular",
            "field 'environment': unknown value '" + c.environment + "' (cartpole, mountaincar, tabular)");
  r.read("tabular_path", c.tabular_path, c.environment == "tabular");

  c.policy = c.environment == "tabular" ? "softmax" : "mlp";
  if (r.read("policy", c.policy))
    r.check(c.policy == "mlp" || c.policy == "linear" || c.policy == "softmax",
            "field 'policy': unknown value '" + c.policy + "' (mlp, linear, softmax)");
  r.check(c.policy != "softmax" || c.environment == "tabular",
          "field 'policy': softmax needs the tabular environment");
  if (r.read("hidden", c.hidden)) r.check(c.hidden >= 1, "field 'hidden' must be >= 1");
  r.read("bias_feature", c.bias_feature);
  if (r.read("sigma", c.sigma)) r.check(c.sigma > 0.0, "field 'sigma' must be > 0");
  if (r.read("init_scale", c.init_scale)) r.check(c.init_scale >= 0.0, "field 'init_scale' must be >= 0");

  if (r.read("gamma", c.gamma)) r.check(c.gamma > 0.0 && c.gamma < 1.0, "field 'gamma' must lie in (0, 1)");
  c.horizon = c.environment == "mountaincar" ? 1000 : c.environment == "tabular" ? 3 : 100;
  if (r.read("horizon", c.horizon)) r.check(c.horizon >= 1, "field 'horizon' must be >= 1");

  if (r.read("eta", c.eta, true)) r.check(c.eta > 0.0, "field 'eta' must be > 0");
  if (r.read("initial_batch", c.initial_batch, true))
    r.check(c.initial_batch >= 1, "field 'initial_batch' must be >= 1");
  const bool needs_b = c.algorithm != Algorithm::gpomdp;
  if (r.read("batch_size", c.batch_size, needs_b)) r.check(c.batch_size >= 1, "field 'batch_size' must be >= 1");
  if (!needs_b && c.batch_size < 1) c.batch_size = c.initial_batch;

  const bool needs_alpha = c.algorithm == Algorithm::storm_pg;
  if (r.read("alpha", c.alpha, needs_alpha))
    r.check(c.alpha >= 0.0 && c.alpha <= 1.0, "field 'alpha' must lie in [0, 1]");
  const bool needs_m = c.algorithm == Algorithm::svrpg || c.algorithm == Algorithm::srvrpg;
  if (r.read("epoch_length", c.epoch_length, needs_m))
    r.check(c.epoch_length >= 1, "field 'epoch_length' must be >= 1");

  const bool has_t = r.read("iterations", c.iterations);
  const bool has_budget = r.read("max_trajectories", c.max_trajectories);
  r.check(has_t || has_budget, "missing stop rule: set 'iterations' and/or 'max_trajectories'");
  r.check(c.iterations >= 0, "field 'iterations' must be >= 0");
  r.check(c.max_trajectories >= 0, "field 'max_trajectories' must be >= 0");

  if (j.contains("is_cap") && !j["is_cap"].is_null()) {
    double cap = 0.0;
    if (r.read("is_cap", cap)) {
      r.check(cap > 0.0, "field 'is_cap' must be > 0 (or null for no cap)");
      c.is_cap = cap;
    }
  }
  std::string baseline;
  if (r.read("baseline", baseline)) {
    if (baseline == "zero")
      c.baseline = BaselineSpec::Kind::zero;
    else if (baseline == "per_step_mean")
      c.baseline = BaselineSpec::Kind::per_step_mean;
    else
      r.problems.push_back("field 'baseline': unknown value '" + baseline + "' (zero, per_step_mean)");
  }
  std::string optimizer;
  if (r.read("optimizer", optimizer)) {
    try {
      c.optimizer = parse_optimizer_kind(optimizer);
    } catch (const ContractViolation&) {
      r.problems.push_back("field 'optimizer': unknown value '" + optimizer + "' (ascent, adam)");
    }
  }
  if (r.read("decay", c.decay)) r.check(c.decay > 0.0 && c.decay <= 1.0, "field 'decay' must lie in (0, 1]");

  if (r.read("num_seeds", c.num_seeds)) r.check(c.num_seeds >= 1, "field 'num_seeds' must be >= 1");
  r.read("master_seed", c.master_seed);
  r.read("output_dir", c.output_dir);
  if (r.read("jobs", c.jobs)) r.check(c.jobs >= 1, "field 'jobs' must be >= 1");
  if (r.read("checkpoint_every", c.checkpoint_every))
    r.check(c.checkpoint_every >= 0, "field 'checkpoint_every' must be >= 0");
  if (j.contains("return_threshold") && !j["return_threshold"].is_null()) {
    double thr = 0.0;
    if (r.read("return_threshold", thr)) c.return_threshold = thr;
  }
  if (r.read("auc_budget", c.auc_budget)) r.check(c.auc_budget >= 0, "field 'auc_budget' must be >= 0");
  if (r.read("select_best", c.select_best)) r.check(c.select_best >= 0, "field 'select_best' must be >= 0");

  if (!r.problems.empty()) throw ConfigError(std::move(r.problems));
  return c;
}

ExperimentConfig ExperimentConfig::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({"cannot open config file " + path.string()});
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError({path.string() + ": " + e.what()});
  }
  return from_json(j);
}

nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json j{{"algorithm", to_string(algorithm)},
                   {"environment", environment},
                   {"policy", policy},
                   {"hidden", hidden},
                   {"bias_feature", bias_feature},
                   {"sigma", sigma},
                   {"init_scale", init_scale},
                   {"gamma", gamma},
                   {"horizon", horizon},
                   {"eta", eta},
                   {"batch_size", batch_size},
                   {"initial_batch", initial_batch},
                   {"alpha", alpha},
                   {"epoch_length", epoch_length},
                   {"iterations", iterations},
                   {"max_trajectories", max_trajectories},
                   {"baseline", baseline == BaselineSpec::Kind::zero ? "zero" : "per_step_mean"},
                   {"optimizer", to_string(optimizer)},
                   {"decay", decay},
                   {"num_seeds", num_seeds},
                   {"master_seed", master_seed},
                   {"output_dir", output_dir},
                   {"jobs", jobs},
                   {"checkpoint_every", checkpoint_every},
                   {"auc_budget", auc_budget},
                   {"select_best", select_best}};
  if (!tabular_path.empty()) j["tabular_path"] = tabular_path;
  j["is_cap"] = is_cap ? nlohmann::json(*is_cap) : nlohmann::json(nullptr);
  j["return_threshold"] = return_threshold ? nlohmann::json(*return_threshold) : nlohmann::json(nullptr);
  return j;
}

AlgorithmConfig ExperimentConfig::algorithm_config(std::uint64_t seed) const {
  AlgorithmConfig a;
  a.algorithm = algorithm;
  a.gamma = gamma;
  a.initial_batch = initial_batch;
  a.batch_size = batch_size;
  a.epoch_length = epoch_length;
  a.alpha = algorithm == Algorithm::storm_pg ? alpha : 1.0;
  a.is_cap = is_cap;
  a.baseline = baseline;
  a.seed = seed;
  a.jobs = 1;
  return a;
}

OptimizerState ExperimentConfig::optimizer_state() const {
  return optimizer == OptimizerKind::adam ? OptimizerState::adam(eta, decay)
                                          : OptimizerState::ascent(eta, decay);
}

StopRule ExperimentConfig::stop_rule() const { return StopRule{iterations, max_trajectories}; }

std::unique_ptr<Environment> make_environment(const ExperimentConfig& config) {
  if (config.environment == "cartpole") return std::make_unique<CartPoleEnv>(config.horizon, config.gamma);
  if (config.environment == "mountaincar")
    return std::make_unique<MountainCarEnv>(config.horizon, config.gamma);
  if (config.environment == "tabular") {
    const auto encoding = config.policy == "softmax" ? TabularActionEncoding::index
                                                     : TabularActionEncoding::gaussian_bins;
    return std::make_unique<TabularEnv>(TabularMDP::load(config.tabular_path), config.horizon,
                                        config.gamma, encoding, config.sigma);
  }
  throw ConfigError({"unknown environment '" + config.environment + "'"});
}

std::unique_ptr<Policy> make_initial_policy(const ExperimentConfig& config,
                                            const EnvironmentSpec& spec, std::uint64_t seed) {
  if (config.policy == "softmax") {
    const TabularMDP mdp = TabularMDP::load(config.tabular_path);
    return std::make_unique<SoftmaxTabularPolicy>(mdp.num_states(), mdp.num_actions());
  }
  GaussianPolicyConfig g;
  g.mean = config.policy == "linear" ? MeanKind::linear : MeanKind::mlp;
  g.state_dim = spec.state_dim;
  g.action_dim = spec.action_dim;
  g.hidden = config.hidden;
  g.bias_feature = config.bias_feature;
  g.sigma = config.sigma;
  return std::make_unique<GaussianPolicy>(GaussianPolicy::initialized(
      g, RngStream::derive_key(seed, kPolicyInitTag), config.init_scale));
}

std::uint64_t seed_for(std::uint64_t master_seed, int index) {
  return RngStream::derive_key(master_seed, static_cast<std::uint64_t>(index));
}

// ---------------------------------------------------------------------------
// Metrics

MetricsRow to_metrics_row(int seed, const IterationRecord& record) {
  return {seed, record.t, record.cumulative_trajectories, record.mean_return,
          record.mean_discounted_return, record.grad_norm};
}

void write_metrics_row(std::ostream& out, const MetricsRow& row) {
  out << row.seed << ',' << row.iteration << ',' << row.cumulative_trajectories << ','
      << format_double(row.avg_return) << ',' << format_double(row.avg_discounted_return) << ','
      << format_double(row.grad_norm) << '\n';
}

std::vector<MetricsRow> read_metrics_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open metrics file " + path.string());
  std::vector<MetricsRow> rows;
  std::string line;
  std::getline(in, line);
  if (line != kMetricsHeader) throw std::runtime_error(path.string() + ": unexpected header '" + line + "'");
  long lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string f[6];
    for (auto& field : f) std::getline(ss, field, ',');
    try {
      rows.push_back({std::stoi(f[0]), std::stol(f[1]), std::stol(f[2]), std::stod(f[3]),
                      std::stod(f[4]), std::stod(f[5])});
    } catch (const std::exception&) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": malformed row");
    }
  }
  return rows;
}

double area_under_curve(const std::vector<MetricsRow>& rows, long budget) {
  double total = 0.0;
  long counted = 0;
  long previous = 0;
  for (const auto& row : rows) {
    long n = row.cumulative_trajectories - previous;
    previous = row.cumulative_trajectories;
    if (budget > 0) n = std::min(n, budget - counted);
    if (n <= 0) break;
    total += static_cast<double>(n) * row.avg_return;
    counted += n;
  }
  return counted > 0 ? total / static_cast<double>(counted) : 0.0;
}

std::optional<long> trajectories_to_threshold(const std::vector<MetricsRow>& rows, double threshold) {
  for (const auto& row : rows)
    if (row.avg_return >= threshold) return row.cumulative_trajectories;
  return std::nullopt;
}

std::vector<SeedSummary> ExperimentSummary::best(int k) const {
  std::vector<SeedSummary> ok;
  for (const auto& s : seeds)
    if (!s.failed) ok.push_back(s);
  std::stable_sort(ok.begin(), ok.end(),
                   [](const SeedSummary& a, const SeedSummary& b) { return a.final_return > b.final_return; });
  if (k > 0 && static_cast<std::size_t>(k) < ok.size()) ok.resize(static_cast<std::size_t>(k));
  return ok;
}

namespace {

double median(std::vector<double> v) {
  if (v.empty()) return std::nan("");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

nlohmann::json seed_json(const SeedSummary& s) {
  nlohmann::json j{{"index", s.index},
                   {"seed", s.seed},
                   {"failed", s.failed},
                   {"iterations", s.iterations},
                   {"trajectories", s.trajectories},
                   {"final_return", s.final_return},
                   {"auc", s.auc}};
  j["trajectories_to_threshold"] =
      s.trajectories_to_threshold ? nlohmann::json(*s.trajectories_to_threshold) : nlohmann::json(nullptr);
  if (s.failed) j["error"] = s.error;
  return j;
}

}  // namespace

nlohmann::json ExperimentSummary::to_json(int select_best) const {
  const auto chosen = best(select_best);
  nlohmann::json j;
  j["threshold"] = threshold ? nlohmann::json(*threshold) : nlohmann::json(nullptr);
  j["seeds"] = nlohmann::json::array();
  for (const auto& s : seeds) j["seeds"].push_back(seed_json(s));
  std::vector<double> aucs, ttt;
  int reached = 0;
  for (const auto& s : chosen) {
    aucs.push_back(s.auc);
    if (s.trajectories_to_threshold) ++reached;
    ttt.push_back(s.trajectories_to_threshold ? static_cast<double>(*s.trajectories_to_threshold)
                                              : std::numeric_limits<double>::infinity());
  }
  j["select_best"] = select_best;
  j["selected_indices"] = nlohmann::json::array();
  for (const auto& s : chosen) j["selected_indices"].push_back(s.index);
  j["median_auc"] = aucs.empty() ? nlohmann::json(nullptr) : nlohmann::json(median(aucs));
  const double m = median(ttt);
  j["median_trajectories_to_threshold"] = std::isfinite(m) ? nlohmann::json(m) : nlohmann::json(nullptr);
  j["seeds_reaching_threshold"] = reached;
  return j;
}

// ---------------------------------------------------------------------------
// Runs

namespace {

nlohmann::json checkpoint_json(const ExperimentConfig& config, int index, std::uint64_t seed,
                               const Policy& architecture, const AlgorithmState& state) {
  return {{"config", config.to_json()},
          {"seed_index", index},
          {"seed", seed},
          {"policy", architecture.describe()},
          {"state", state.to_json()}};
}

void write_json_file(const fs::path& path, const nlohmann::json& j) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp);
    out << j.dump(1) << '\n';
    if (!out) throw std::runtime_error("cannot write " + path.string());
  }
  fs::rename(tmp, path);
}

std::optional<double> threshold_for(const ExperimentConfig& config, const Environment& env) {
  if (config.return_threshold) return config.return_threshold;
  if (env.max_return() > 0.0) return 0.9 * env.max_return();
  return std::nullopt;
}

}  // namespace

SeedRun run_seed(const ExperimentConfig& config, int index, const fs::path& out_dir) {
  SeedRun run;
  run.summary.index = index;
  run.summary.seed = seed_for(config.master_seed, index);
  const std::uint64_t seed = run.summary.seed;

  std::ofstream metrics, timing;
  const bool files = !out_dir.empty();
  const std::string suffix = "_seed" + std::to_string(index);
  if (files) {
    metrics.open(out_dir / ("metrics" + suffix + ".csv"));
    timing.open(out_dir / ("timing" + suffix + ".csv"));
    metrics << kMetricsHeader << '\n';
    timing << "seed,iteration,wall_ms\n";
  }

  std::unique_ptr<Environment> env;
  std::unique_ptr<Policy> policy;
  try {
    env = make_environment(config);
    policy = make_initial_policy(config, env->spec(), seed);
    const auto start = std::chrono::steady_clock::now();
    const auto observer = [&](const IterationRecord& record, const AlgorithmState& state) {
      const MetricsRow row = to_metrics_row(index, record);
      run.rows.push_back(row);
      if (!files) return;
      write_metrics_row(metrics, row);
      const double ms =
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
      timing << index << ',' << record.t << ',' << format_double(ms) << '\n';
      if (config.checkpoint_every > 0 && record.t > 0 && record.t % config.checkpoint_every == 0)
        write_json_file(out_dir / ("checkpoint" + suffix + "_t" + std::to_string(record.t) + ".json"),
                        checkpoint_json(config, index, seed, *policy, state));
    };
    const RunHistory history =
        run_algorithm(config.algorithm_config(seed), *policy, config.optimizer_state(),
                      rollout_sampler(*env), config.stop_rule(), observer);
    if (files)
      write_json_file(out_dir / ("checkpoint" + suffix + ".json"),
                      checkpoint_json(config, index, seed, *policy, history.final_state));
  } catch (const std::exception& e) {
    run.summary.failed = true;
    run.summary.error = e.what();
  }

  if (!run.rows.empty()) {
    run.summary.iterations = run.rows.back().iteration;
    run.summary.trajectories = run.rows.back().cumulative_trajectories;
    run.summary.final_return = run.rows.back().avg_return;
    run.summary.auc = area_under_curve(run.rows, config.auc_budget);
    if (env) {
      if (const auto thr = threshold_for(config, *env))
        run.summary.trajectories_to_threshold = trajectories_to_threshold(run.rows, *thr);
    }
  }
  return run;
}

ExperimentSummary cmd_train(const ExperimentConfig& config, bool write_files) {
  const fs::path dir = write_files ? fs::path(config.output_dir) : fs::path();
  if (write_files) fs::create_directories(dir);
  std::vector<SeedRun> runs(static_cast<std::size_t>(config.num_seeds));
  parallel_for(runs.size(), config.jobs,
               [&](std::size_t k) { runs[k] = run_seed(config, static_cast<int>(k), dir); });

  ExperimentSummary summary;
  const auto env = make_environment(config);
  summary.threshold = threshold_for(config, *env);
  for (auto& r : runs) summary.seeds.push_back(r.summary);
  if (write_files) {
    nlohmann::json j = summary.to_json(config.select_best);
    j["config"] = config.to_json();
    write_json_file(dir / "summary.json", j);
  }
  return summary;
}

std::vector<MetricsRow> cmd_replay(const fs::path& checkpoint, const fs::path& metrics_out) {
  std::ifstream in(checkpoint);
  if (!in) throw std::runtime_error("cannot open checkpoint " + checkpoint.string());
  nlohmann::json j;
  in >> j;
  const ExperimentConfig config = ExperimentConfig::from_json(j.at("config"));
  const int index = j.at("seed_index").get<int>();
  const std::uint64_t seed = j.at("seed").get<std::uint64_t>();
  const AlgorithmState state = AlgorithmState::from_json(j.at("state"));

  const auto env = make_environment(config);
  const auto policy = make_initial_policy(config, env->spec(), seed);
  require(policy->param_count() == state.params.size(),
          "checkpoint parameters do not match the configured policy");

  std::vector<MetricsRow> rows;
  std::ofstream out;
  if (!metrics_out.empty()) {
    out.open(metrics_out);
    out << kMetricsHeader << '\n';
  }
  run_algorithm(config.algorithm_config(seed), *policy, config.optimizer_state(),
                rollout_sampler(*env), config.stop_rule(),
                [&](const IterationRecord& record, const AlgorithmState&) {
                  rows.push_back(to_metrics_row(index, record));
                  if (out.is_open()) write_metrics_row(out, rows.back());
                },
                state);
  return rows;
}

// ---------------------------------------------------------------------------
// Curves

std::vector<CurvePoint> aggregate_curves(const std::vector<std::vector<MetricsRow>>& seeds,
                                         int window, bool discounted) {
  require(window >= 1, "smoothing window must be >= 1");
  struct Series {
    std::vector<long> x;
    std::vector<double> y;
  };
  std::vector<Series> series;
  std::set<long> grid;
  for (const auto& rows : seeds) {
    Series s;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const std::size_t lo = i + 1 >= static_cast<std::size_t>(window) ? i + 1 - window : 0;
      double sum = 0.0;
      for (std::size_t k = lo; k <= i; ++k)
        sum += discounted ? rows[k].avg_discounted_return : rows[k].avg_return;
      s.x.push_back(rows[i].cumulative_trajectories);
      s.y.push_back(sum / static_cast<double>(i - lo + 1));
      grid.insert(rows[i].cumulative_trajectories);
    }
    series.push_back(std::move(s));
  }

  std::vector<CurvePoint> curve;
  for (long x : grid) {
    std::vector<double> values;
    for (const auto& s : series) {
      const auto it = std::upper_bound(s.x.begin(), s.x.end(), x);
      if (it == s.x.begin()) continue;
      values.push_back(s.y[static_cast<std::size_t>(it - s.x.begin()) - 1]);
    }
    if (values.empty()) continue;
    std::sort(values.begin(), values.end());
    const double n = static_cast<double>(values.size());
    double sum = 0.0;
    for (double v : values) sum += v;
    CurvePoint p;
    p.trajectories = x;
    p.seeds = static_cast<int>(values.size());
    p.mean = sum / n;
    if (values.size() > 1) {
      double ss = 0.0;
      for (double v : values) ss += (v - p.mean) * (v - p.mean);
      p.stddev = std::sqrt(ss / (n - 1.0));
    }
    const double half = 1.96 * p.stddev / std::sqrt(n);
    p.lower = p.mean - half;
    p.upper = p.mean + half;
    curve.push_back(p);
  }
  return curve;
}

void write_curve_csv(std::ostream& out, const std::vector<CurvePoint>& curve) {
  out << "trajectories,seeds,mean,stddev,lower,upper\n";
  for (const auto& p : curve)
    out << p.trajectories << ',' << p.seeds << ',' << format_double(p.mean) << ','
        << format_double(p.stddev) << ',' << format_double(p.lower) << ','
        << format_double(p.upper) << '\n';
}

std::vector<CurvePoint> cmd_curve(const fs::path& dir, int window, const fs::path& out,
                                  bool discounted) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("metrics_seed", 0) == 0 && entry.path().extension() == ".csv")
      files.push_back(entry.path());
  }
  if (files.empty()) throw std::runtime_error("no metrics_seed*.csv files in " + dir.string());
  std::sort(files.begin(), files.end());
  std::vector<std::vector<MetricsRow>> seeds;
  for (const auto& f : files) seeds.push_back(read_metrics_csv(f));
  const auto curve = aggregate_curves(seeds, window, discounted);
  if (!out.empty()) {
    std::ofstream o(out);
    if (!o) throw std::runtime_error("cannot write " + out.string());
    write_curve_csv(o, curve);
  }
  return curve;
}

std::string theory_report(const ConstantsProfile& profile, double epsilon, int batch) {
  const TheoreticalParams p = theoretical_params(profile, epsilon, batch);
  std::ostringstream o;
  o.precision(10);
  o << "epsilon          " << epsilon << "\n"
    << "B                " << batch << "\n"
    << "alpha            " << p.alpha << "\n"
    << "eta              " << p.eta << "\n"
    << "S0               " << p.s0 << "  (unrounded " << p.s0_unrounded << ")\n"
    << "T lower (gap)    " << p.t_lower_gap << "\n"
    << "T lower (var)    " << p.t_lower_variance << "\n"
    << "T                " << p.t << "\n"
    << "IFO = S0 + T*B   " << p.ifo << "\n"
    << "4 C^2 eta^2      " << p.c_gamma_lhs << " <= alpha*B " << p.c_gamma_rhs
    << (p.c_gamma_constraint_ok ? "  ok" : "  VIOLATED") << "\n"
    << "4 eta^2 L_d^2    " << p.l_d_lhs << " <= alpha*B " << p.c_gamma_rhs
    << (p.l_d_constraint_ok ? "  ok" : "  VIOLATED") << "\n"
    << "corollary alpha  " << p.corollary_alpha << "\n"
    << "corollary eta    " << p.corollary_eta << "\n";
  return o.str();
}

}  // namespace stormpg
