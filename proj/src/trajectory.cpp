#include "stormpg/trajectory.hpp"

#include "stormpg/parallel.hpp"
#include "stormpg/policy.hpp"

#include <json.hpp>

#include <cmath>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>

namespace stormpg {

void EnvironmentSpec::validate() const {
  require(state_dim > 0, "state_dim must be positive");
  require(action_dim > 0, "action_dim must be positive");
  require(gamma > 0.0 && gamma < 1.0, "gamma must lie strictly inside (0, 1)");
  require(horizon >= 1, "horizon must be at least 1");
}

Trajectory::Trajectory(std::vector<StepRecord> steps, int horizon_cap, ParamsId behavior_params_id,
                       std::uint64_t master_seed, std::uint64_t index)
    : steps_(std::move(steps)),
      horizon_cap_(horizon_cap),
      behavior_params_id_(behavior_params_id),
      master_seed_(master_seed),
      index_(index) {
  require(horizon_cap_ >= 1, "trajectory horizon cap must be positive");
  require(!steps_.empty(), "trajectory must contain at least one step");
  require(steps_.size() <= static_cast<std::size_t>(horizon_cap_),
          "trajectory longer than its horizon cap");
  const auto sd = steps_.front().state.size();
  const auto ad = steps_.front().action.size();
  for (const auto& s : steps_) {
    require(s.state.size() == sd && s.action.size() == ad,
            "state/action dimensions change within a trajectory");
    require(std::isfinite(s.reward), "trajectory reward is not finite");
  }
}

double Trajectory::undiscounted_return() const {
  double total = 0.0;
  for (const auto& s : steps_) total += s.reward;
  return total;
}

double discounted_return(const Trajectory& traj, double gamma) {
  require(gamma > 0.0 && gamma < 1.0, "gamma must lie strictly inside (0, 1)");
  double total = 0.0;
  double discount = 1.0;
  for (const auto& s : traj.steps()) {
    total += discount * s.reward;
    discount *= gamma;
  }
  return total;
}

Trajectory rollout(Environment& env, const Policy& policy, RngStream& rng,
                   std::uint64_t master_seed, std::uint64_t index) {
  const EnvironmentSpec spec = env.spec();
  require(policy.state_dim() == spec.state_dim && policy.action_dim() == spec.action_dim,
          "policy dimensions do not match the environment");
  std::vector<StepRecord> steps;
  steps.reserve(static_cast<std::size_t>(spec.horizon));
  Eigen::VectorXd state = env.reset(rng);
  for (int t = 0; t < spec.horizon; ++t) {
    if (!state.allFinite())
      throw NumericalError("non-finite state at step " + std::to_string(t));
    Eigen::VectorXd action = policy.sample_action(state, rng);
    if (!action.allFinite())
      throw NumericalError("non-finite action at step " + std::to_string(t));
    StepOutcome out = env.step(action, rng);
    if (!std::isfinite(out.reward))
      throw NumericalError("non-finite reward at step " + std::to_string(t));
    steps.push_back({std::move(state), std::move(action), out.reward});
    if (out.done) break;
    state = std::move(out.next_state);
  }
  return Trajectory(std::move(steps), spec.horizon, policy.id(), master_seed, index);
}

std::vector<Trajectory> batch_rollout(const Environment& env, const Policy& policy, int n,
                                      std::uint64_t master_seed, int jobs) {
  require(n >= 1, "batch_rollout needs n >= 1");
  std::vector<std::optional<Trajectory>> slots(static_cast<std::size_t>(n));
  parallel_for(slots.size(), jobs, [&](std::size_t i) {
    auto local = env.clone();
    RngStream rng = RngStream::derive(master_seed, i);
    try {
      slots[i].emplace(rollout(*local, policy, rng, master_seed, i));
    } catch (const NumericalError& e) {
      throw NumericalError("trajectory " + std::to_string(i) + ": " + e.what());
    }
  });
  std::vector<Trajectory> out;
  out.reserve(slots.size());
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

namespace {

nlohmann::json vector_json(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

Eigen::VectorXd json_vector(const nlohmann::json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

}  // namespace

void write_jsonl(std::ostream& out, const std::vector<Trajectory>& trajs) {
  for (const auto& traj : trajs) {
    nlohmann::json j;
    j["behavior_params_id"] = format_params_id(traj.behavior_params_id());
    j["master_seed"] = traj.master_seed();
    j["index"] = traj.index();
    j["horizon_cap"] = traj.horizon_cap();
    auto& states = j["states"] = nlohmann::json::array();
    auto& actions = j["actions"] = nlohmann::json::array();
    auto& rewards = j["rewards"] = nlohmann::json::array();
    for (const auto& s : traj.steps()) {
      states.push_back(vector_json(s.state));
      actions.push_back(vector_json(s.action));
      rewards.push_back(s.reward);
    }
    out << j.dump() << '\n';
  }
}

std::vector<Trajectory> read_jsonl(std::istream& in) {
  std::vector<Trajectory> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    const auto& states = j.at("states");
    const auto& actions = j.at("actions");
    const auto& rewards = j.at("rewards");
    require(states.size() == actions.size() && states.size() == rewards.size(),
            "jsonl trajectory arrays differ in length");
    std::vector<StepRecord> steps;
    for (std::size_t t = 0; t < states.size(); ++t)
      steps.push_back({json_vector(states[t]), json_vector(actions[t]), rewards[t].get<double>()});
    const ParamsId id = std::stoull(j.at("behavior_params_id").get<std::string>(), nullptr, 16);
    out.emplace_back(std::move(steps), j.at("horizon_cap").get<int>(), id,
                     j.at("master_seed").get<std::uint64_t>(), j.at("index").get<std::uint64_t>());
  }
  return out;
}

}  // namespace stormpg
