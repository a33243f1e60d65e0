#include "stormpg/environments.hpp"

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>

namespace stormpg {

namespace {

double clip_unit(double a) { return std::clamp(a, -1.0, 1.0); }

double scalar_action(const Eigen::VectorXd& action) {
  require(action.size() == 1, "expected a scalar action");
  require(std::isfinite(action[0]), "action is not finite");
  return action[0];
}

}  // namespace

// ---------------------------------------------------------------------------
// Cart-pole

CartPoleStep cartpole_step(const CartPoleState& state, double action, const CartPoleParams& p) {
  const auto [x, x_dot, theta, theta_dot] = state;
  const double force = clip_unit(action) * p.force_scale;
  const double total_mass = p.cart_mass + p.pole_mass;
  const double polemass_length = p.pole_mass * p.half_length;
  const double cos_t = std::cos(theta);
  const double sin_t = std::sin(theta);

  const double temp = (force + polemass_length * theta_dot * theta_dot * sin_t) / total_mass;
  const double theta_acc =
      (p.gravity * sin_t - cos_t * temp) /
      (p.half_length * (4.0 / 3.0 - p.pole_mass * cos_t * cos_t / total_mass));
  const double x_acc = temp - polemass_length * theta_acc * cos_t / total_mass;

  CartPoleState next{x + p.dt * x_dot, x_dot + p.dt * x_acc, theta + p.dt * theta_dot,
                     theta_dot + p.dt * theta_acc};
  const bool done = std::abs(next[0]) > p.position_bound || std::abs(next[2]) > p.angle_bound;
  return {next, 1.0, done};
}

CartPoleEnv::CartPoleEnv(int horizon, double gamma, CartPoleParams params)
    : horizon_(horizon), gamma_(gamma), params_(params) {
  spec().validate();
}

Eigen::VectorXd CartPoleEnv::reset(RngStream& rng) {
  for (auto& v : state_) v = -0.05 + 0.1 * rng.uniform();
  return Eigen::Map<const Eigen::Vector4d>(state_.data());
}

StepOutcome CartPoleEnv::step(const Eigen::VectorXd& action, RngStream&) {
  const CartPoleStep s = cartpole_step(state_, scalar_action(action), params_);
  state_ = s.next_state;
  return {Eigen::Map<const Eigen::Vector4d>(state_.data()), s.reward, s.done};
}

std::unique_ptr<Environment> CartPoleEnv::clone() const {
  return std::make_unique<CartPoleEnv>(*this);
}

// ---------------------------------------------------------------------------
// Mountain-car

double mountaincar_height_bonus(double position, const MountainCarParams& p) {
  return p.height_bonus * 0.5 * (std::sin(3.0 * position) + 1.0);
}

MountainCarStep mountaincar_step(const MountainCarState& state, double action,
                                 const MountainCarParams& p) {
  auto [position, velocity] = state;
  velocity += clip_unit(action) * p.force_scale - p.gravity * std::cos(3.0 * position);
  velocity = std::clamp(velocity, -p.max_speed, p.max_speed);
  position = std::clamp(position + velocity, p.min_position, p.max_position);
  if (position <= p.min_position && velocity < 0.0) velocity = 0.0;
  const bool done = position >= p.goal_position;
  const double reward = p.step_penalty + mountaincar_height_bonus(position, p);
  return {{position, velocity}, reward, done};
}

MountainCarEnv::MountainCarEnv(int horizon, double gamma, MountainCarParams params)
    : horizon_(horizon), gamma_(gamma), params_(params) {
  spec().validate();
}

Eigen::VectorXd MountainCarEnv::reset(RngStream& rng) {
  state_ = {-0.6 + 0.2 * rng.uniform(), 0.0};
  return Eigen::Map<const Eigen::Vector2d>(state_.data());
}

StepOutcome MountainCarEnv::step(const Eigen::VectorXd& action, RngStream&) {
  const MountainCarStep s = mountaincar_step(state_, scalar_action(action), params_);
  state_ = s.next_state;
  return {Eigen::Map<const Eigen::Vector2d>(state_.data()), s.reward, s.done};
}

std::unique_ptr<Environment> MountainCarEnv::clone() const {
  return std::make_unique<MountainCarEnv>(*this);
}

// ---------------------------------------------------------------------------
// Finite MDPs

namespace {

void check_distribution(const std::vector<double>& p, const std::string& what) {
  double total = 0.0;
  for (double v : p) {
    require(std::isfinite(v) && v >= 0.0, what + " has a negative or non-finite entry");
    total += v;
  }
  require(std::abs(total - 1.0) <= 1e-12, what + " does not sum to 1");
}

int sample_index(const std::vector<double>& p, double u) {
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    acc += p[i];
    if (u < acc) return static_cast<int>(i);
  }
  // u landed in the rounding gap above the cumulative sum: last nonzero entry.
  for (std::size_t i = p.size(); i-- > 0;)
    if (p[i] > 0.0) return static_cast<int>(i);
  return static_cast<int>(p.size()) - 1;
}

}  // namespace

TabularMDP::TabularMDP(std::vector<std::vector<std::vector<double>>> transitions,
                       std::vector<std::vector<double>> rewards, std::vector<double> initial)
    : transitions_(std::move(transitions)), rewards_(std::move(rewards)), initial_(std::move(initial)) {
  const std::size_t S = initial_.size();
  require(S >= 1, "tabular MDP needs at least one state");
  require(transitions_.size() == S && rewards_.size() == S, "tabular MDP table sizes disagree");
  num_actions_ = static_cast<int>(rewards_.front().size());
  require(num_actions_ >= 1, "tabular MDP needs at least one action");
  check_distribution(initial_, "initial distribution");
  for (std::size_t s = 0; s < S; ++s) {
    require(rewards_[s].size() == static_cast<std::size_t>(num_actions_) &&
                transitions_[s].size() == static_cast<std::size_t>(num_actions_),
            "tabular MDP action counts disagree");
    for (std::size_t a = 0; a < rewards_[s].size(); ++a) {
      require(std::isfinite(rewards_[s][a]), "reward table has a non-finite entry");
      require(transitions_[s][a].size() == S, "transition row has the wrong length");
      check_distribution(transitions_[s][a],
                         "P[" + std::to_string(s) + "," + std::to_string(a) + ",.]");
    }
  }
}

TabularMDP TabularMDP::with_rewards(double scale, double shift) const {
  auto rewards = rewards_;
  for (auto& row : rewards)
    for (auto& r : row) r = scale * r + shift;
  return TabularMDP(transitions_, std::move(rewards), initial_);
}

nlohmann::json TabularMDP::to_json() const {
  return {{"num_states", num_states()},
          {"num_actions", num_actions()},
          {"transitions", transitions_},
          {"rewards", rewards_},
          {"initial", initial_}};
}

TabularMDP TabularMDP::from_json(const nlohmann::json& j) {
  TabularMDP mdp(j.at("transitions").get<std::vector<std::vector<std::vector<double>>>>(),
                 j.at("rewards").get<std::vector<std::vector<double>>>(),
                 j.at("initial").get<std::vector<double>>());
  if (j.contains("num_states"))
    require(j["num_states"].get<int>() == mdp.num_states(), "num_states disagrees with tables");
  if (j.contains("num_actions"))
    require(j["num_actions"].get<int>() == mdp.num_actions(), "num_actions disagrees with tables");
  return mdp;
}

TabularMDP TabularMDP::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open tabular MDP file " + path.string());
  return from_json(nlohmann::json::parse(in));
}

TabularStep tabular_step(const TabularMDP& mdp, int state, int action, RngStream& rng) {
  require(state >= 0 && state < mdp.num_states(), "tabular state index out of range");
  require(action >= 0 && action < mdp.num_actions(), "tabular action index out of range");
  const int next = sample_index(mdp.transition_row(state, action), rng.uniform());
  return {next, mdp.reward(state, action), false};
}

TabularMDP default_oracle_mdp() {
  return TabularMDP({{{0.7, 0.3}, {0.2, 0.8}}, {{0.9, 0.1}, {0.4, 0.6}}},
                    {{1.0, 0.0}, {0.5, 2.0}}, {0.6, 0.4});
}

TabularEnv::TabularEnv(TabularMDP mdp, int horizon, double gamma, TabularActionEncoding encoding,
                       double bin_sigma)
    : mdp_(std::move(mdp)), horizon_(horizon), gamma_(gamma), encoding_(encoding) {
  spec().validate();
  if (encoding_ == TabularActionEncoding::gaussian_bins) {
    require(bin_sigma > 0.0, "bin sigma must be positive");
    const boost::math::normal_distribution<double> prior(0.0, bin_sigma);
    for (int k = 1; k < mdp_.num_actions(); ++k)
      bin_edges_.push_back(boost::math::quantile(prior, static_cast<double>(k) / mdp_.num_actions()));
  }
}

int TabularEnv::action_to_index(double action) const {
  if (encoding_ == TabularActionEncoding::index) {
    const double rounded = std::round(action);
    require(rounded == action, "tabular action is not an index");
    return static_cast<int>(rounded);
  }
  return static_cast<int>(std::upper_bound(bin_edges_.begin(), bin_edges_.end(), action) -
                          bin_edges_.begin());
}

Eigen::VectorXd TabularEnv::reset(RngStream& rng) {
  state_ = sample_index(mdp_.initial_distribution(), rng.uniform());
  return Eigen::VectorXd::Constant(1, state_);
}

StepOutcome TabularEnv::step(const Eigen::VectorXd& action, RngStream& rng) {
  const TabularStep s = tabular_step(mdp_, state_, action_to_index(scalar_action(action)), rng);
  state_ = s.next_state;
  return {Eigen::VectorXd::Constant(1, state_), s.reward, s.done};
}

std::unique_ptr<Environment> TabularEnv::clone() const {
  return std::make_unique<TabularEnv>(*this);
}

}  // namespace stormpg
