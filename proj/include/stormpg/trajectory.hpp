#pragma once

// Trajectory data model, rollout sampling and discounted-return arithmetic.

#include "stormpg/common.hpp"
#include "stormpg/rng.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

namespace stormpg {

class Policy;

struct EnvironmentSpec {
  int state_dim = 1;
  int action_dim = 1;
  double gamma = 0.99;
  int horizon = 1;

  void validate() const;
};

struct StepRecord {
  Eigen::VectorXd state;
  Eigen::VectorXd action;
  double reward = 0.0;
};

struct StepOutcome {
  Eigen::VectorXd next_state;
  double reward = 0.0;
  bool done = false;
};

/// Episodic simulator. Instances carry the current state and are not shared
/// between concurrent rollouts; use clone() to get an independent copy.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual EnvironmentSpec spec() const = 0;
  virtual Eigen::VectorXd reset(RngStream& rng) = 0;
  virtual StepOutcome step(const Eigen::VectorXd& action, RngStream& rng) = 0;
  virtual std::unique_ptr<Environment> clone() const = 0;
  virtual std::string name() const = 0;
  /// Largest achievable undiscounted return, when known (0 if unknown).
  virtual double max_return() const { return 0.0; }
};

/// A sampled episode. Immutable once built; safe to share across threads.
class Trajectory {
 public:
  Trajectory(std::vector<StepRecord> steps, int horizon_cap, ParamsId behavior_params_id,
             std::uint64_t master_seed = 0, std::uint64_t index = 0);

  const std::vector<StepRecord>& steps() const { return steps_; }
  std::size_t size() const { return steps_.size(); }
  const StepRecord& operator[](std::size_t t) const { return steps_[t]; }
  int horizon_cap() const { return horizon_cap_; }
  ParamsId behavior_params_id() const { return behavior_params_id_; }
  std::uint64_t master_seed() const { return master_seed_; }
  std::uint64_t index() const { return index_; }

  double undiscounted_return() const;

 private:
  std::vector<StepRecord> steps_;
  int horizon_cap_;
  ParamsId behavior_params_id_;
  std::uint64_t master_seed_;
  std::uint64_t index_;
};

/// Sum_t gamma^t r_t over the realized steps.
double discounted_return(const Trajectory& traj, double gamma);

/// Samples one episode of at most spec().horizon steps. Throws NumericalError
/// naming the step index if the environment or policy produces a non-finite
/// state or action.
Trajectory rollout(Environment& env, const Policy& policy, RngStream& rng,
                   std::uint64_t master_seed = 0, std::uint64_t index = 0);

/// n independent episodes; episode i draws from RngStream::derive(master_seed, i)
/// and lands at position i regardless of `jobs`.
std::vector<Trajectory> batch_rollout(const Environment& env, const Policy& policy, int n,
                                      std::uint64_t master_seed, int jobs = 1);

/// One JSON object per line: states, actions, rewards plus id/seed metadata.
void write_jsonl(std::ostream& out, const std::vector<Trajectory>& trajs);
std::vector<Trajectory> read_jsonl(std::istream& in);

}  // namespace stormpg
