#pragma once

// Self-contained simulators: continuous-action cart-pole and mountain-car,
// plus explicit finite MDPs used by the exact-gradient oracle.

#include "stormpg/trajectory.hpp"

#include <json.hpp>

#include <Eigen/Core>

#include <array>
#include <filesystem>
#include <optional>
#include <vector>

namespace stormpg {

// ---------------------------------------------------------------------------
// Cart-pole

struct CartPoleParams {
  double gravity = 9.8;
  double cart_mass = 1.0;
  double pole_mass = 0.1;
  double half_length = 0.5;
  double force_scale = 10.0;
  double dt = 0.02;
  double angle_bound = 12.0 * 2.0 * 3.14159265358979323846 / 360.0;
  double position_bound = 2.4;
};

/// (x, x_dot, theta, theta_dot)
using CartPoleState = std::array<double, 4>;

struct CartPoleStep {
  CartPoleState next_state;
  double reward;
  bool done;
};

/// One Euler step with force clip(action, -1, 1) * force_scale. Every step,
/// including the failing one, pays reward 1.
CartPoleStep cartpole_step(const CartPoleState& state, double action,
                           const CartPoleParams& params = {});

class CartPoleEnv : public Environment {
 public:
  explicit CartPoleEnv(int horizon = 100, double gamma = 0.99, CartPoleParams params = {});

  EnvironmentSpec spec() const override { return {4, 1, gamma_, horizon_}; }
  Eigen::VectorXd reset(RngStream& rng) override;
  StepOutcome step(const Eigen::VectorXd& action, RngStream& rng) override;
  std::unique_ptr<Environment> clone() const override;
  std::string name() const override { return "cartpole"; }
  double max_return() const override { return horizon_; }

  const CartPoleState& state() const { return state_; }
  void set_state(const CartPoleState& s) { state_ = s; }

 private:
  int horizon_;
  double gamma_;
  CartPoleParams params_;
  CartPoleState state_{};
};

// ---------------------------------------------------------------------------
// Mountain-car

struct MountainCarParams {
  double min_position = -1.2;
  double max_position = 0.6;
  double max_speed = 0.07;
  double goal_position = 0.45;
  double force_scale = 0.0015;
  double gravity = 0.0025;
  double step_penalty = -1.0;
  /// Height shaping: reward += height_bonus * (sin(3x) + 1) / 2.
  double height_bonus = 0.5;
};

/// (position, velocity)
using MountainCarState = std::array<double, 2>;

struct MountainCarStep {
  MountainCarState next_state;
  double reward;
  bool done;
};

double mountaincar_height_bonus(double position, const MountainCarParams& params = {});

/// Force clip(action, -1, 1) * force_scale against the -gravity*cos(3x) field.
/// done iff the new position reaches the goal.
MountainCarStep mountaincar_step(const MountainCarState& state, double action,
                                 const MountainCarParams& params = {});

class MountainCarEnv : public Environment {
 public:
  explicit MountainCarEnv(int horizon = 1000, double gamma = 0.99, MountainCarParams params = {});

  EnvironmentSpec spec() const override { return {2, 1, gamma_, horizon_}; }
  Eigen::VectorXd reset(RngStream& rng) override;
  StepOutcome step(const Eigen::VectorXd& action, RngStream& rng) override;
  std::unique_ptr<Environment> clone() const override;
  std::string name() const override { return "mountaincar"; }

  const MountainCarState& state() const { return state_; }
  void set_state(const MountainCarState& s) { state_ = s; }

 private:
  int horizon_;
  double gamma_;
  MountainCarParams params_;
  MountainCarState state_{};
};

// ---------------------------------------------------------------------------
// Finite MDPs

/// Explicit tables. Rows of P[s, a, .] and rho are validated eagerly.
class TabularMDP {
 public:
  /// transitions[s][a][s'], rewards[s][a], initial[s]
  TabularMDP(std::vector<std::vector<std::vector<double>>> transitions,
             std::vector<std::vector<double>> rewards, std::vector<double> initial);

  int num_states() const { return static_cast<int>(initial_.size()); }
  int num_actions() const { return num_actions_; }
  double transition(int s, int a, int next) const { return transitions_[s][a][next]; }
  const std::vector<double>& transition_row(int s, int a) const { return transitions_[s][a]; }
  double reward(int s, int a) const { return rewards_[s][a]; }
  double initial(int s) const { return initial_[s]; }
  const std::vector<double>& initial_distribution() const { return initial_; }

  /// Same dynamics with every reward mapped through r -> scale * r + shift.
  TabularMDP with_rewards(double scale, double shift) const;

  nlohmann::json to_json() const;
  static TabularMDP from_json(const nlohmann::json& j);
  static TabularMDP load(const std::filesystem::path& path);

 private:
  std::vector<std::vector<std::vector<double>>> transitions_;
  std::vector<std::vector<double>> rewards_;
  std::vector<double> initial_;
  int num_actions_ = 0;
};

struct TabularStep {
  int next_state;
  double reward;
  bool done;
};

/// Samples s' ~ P[s, a, .]; reward R[s, a]. Never terminates on its own.
TabularStep tabular_step(const TabularMDP& mdp, int state, int action, RngStream& rng);

/// Two states, two actions, asymmetric rewards; the oracle's default instance.
TabularMDP default_oracle_mdp();

enum class TabularActionEncoding {
  /// action[0] holds the action index (softmax tabular policy).
  index,
  /// action[0] is a real Gaussian sample, binned at N(0, sigma^2) quantiles
  /// into num_actions equal-mass bins.
  gaussian_bins,
};

class TabularEnv : public Environment {
 public:
  TabularEnv(TabularMDP mdp, int horizon, double gamma,
             TabularActionEncoding encoding = TabularActionEncoding::index, double bin_sigma = 1.0);

  EnvironmentSpec spec() const override { return {1, 1, gamma_, horizon_}; }
  Eigen::VectorXd reset(RngStream& rng) override;
  StepOutcome step(const Eigen::VectorXd& action, RngStream& rng) override;
  std::unique_ptr<Environment> clone() const override;
  std::string name() const override { return "tabular"; }

  const TabularMDP& mdp() const { return mdp_; }
  int action_to_index(double action) const;
  const std::vector<double>& bin_edges() const { return bin_edges_; }

 private:
  TabularMDP mdp_;
  int horizon_;
  double gamma_;
  TabularActionEncoding encoding_;
  std::vector<double> bin_edges_;
  int state_ = 0;
};

}  // namespace stormpg
