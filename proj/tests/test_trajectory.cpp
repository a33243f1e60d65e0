#include "stormpg/environments.hpp"
#include "stormpg/oracle.hpp"
#include "stormpg/policy.hpp"
#include "stormpg/trajectory.hpp"
#include "stormpg/verification.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <sstream>

using namespace stormpg;

namespace {

// One state, reward 1, never terminates.
class ConstantEnv : public Environment {
 public:
  EnvironmentSpec spec() const override { return {1, 1, 0.9, 3}; }
  Eigen::VectorXd reset(RngStream&) override { return Eigen::VectorXd::Constant(1, 0.5); }
  StepOutcome step(const Eigen::VectorXd&, RngStream&) override {
    return {Eigen::VectorXd::Constant(1, 0.5), 1.0, false};
  }
  std::unique_ptr<Environment> clone() const override { return std::make_unique<ConstantEnv>(*this); }
  std::string name() const override { return "constant"; }
};

// Emits a NaN state on the third step.
class BrokenEnv : public ConstantEnv {
 public:
  StepOutcome step(const Eigen::VectorXd& a, RngStream& rng) override {
    auto out = ConstantEnv::step(a, rng);
    if (++calls_ == 2) out.next_state(0) = std::nan("");
    return out;
  }
  std::unique_ptr<Environment> clone() const override { return std::make_unique<BrokenEnv>(*this); }

 private:
  int calls_ = 0;
};

Trajectory with_rewards(const std::vector<double>& rewards) {
  std::vector<StepRecord> steps;
  for (double r : rewards) steps.push_back({Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(1), r});
  return Trajectory(steps, static_cast<int>(rewards.size()), 0);
}

GaussianPolicy linear_policy(int state_dim, double sigma, const ParamVector& params) {
  return GaussianPolicy(GaussianPolicyConfig{MeanKind::linear, state_dim, 1, 0, false, sigma}, params);
}

bool same(const Trajectory& a, const Trajectory& b) {
  if (a.size() != b.size() || a.behavior_params_id() != b.behavior_params_id()) return false;
  for (std::size_t t = 0; t < a.size(); ++t)
    if (a[t].state != b[t].state || a[t].action != b[t].action || a[t].reward != b[t].reward)
      return false;
  return true;
}

}  // namespace

TEST(DiscountedReturn, GeometricExamples) {
  EXPECT_DOUBLE_EQ(discounted_return(with_rewards({1, 1, 1}), 0.5), 1.75);
  EXPECT_DOUBLE_EQ(discounted_return(with_rewards({-3.25}), 0.37), -3.25);
  const Trajectory ones = with_rewards(std::vector<double>(100, 1.0));
  EXPECT_NEAR(discounted_return(ones, 0.99), (1.0 - std::pow(0.99, 100)) / 0.01, 1e-11);
}

TEST(DiscountedReturn, LinearInRewards) {
  const std::vector<double> r = {0.3, -1.2, 2.0, 0.7}, q = {1.0, 0.5, -0.25, 3.0};
  std::vector<double> mix;
  for (std::size_t i = 0; i < r.size(); ++i) mix.push_back(2.0 * r[i] - 3.0 * q[i]);
  EXPECT_NEAR(discounted_return(with_rewards(mix), 0.9),
              2.0 * discounted_return(with_rewards(r), 0.9) - 3.0 * discounted_return(with_rewards(q), 0.9),
              1e-12);
}

TEST(DiscountedReturn, RejectsGammaOutsideUnitInterval) {
  EXPECT_THROW(discounted_return(with_rewards({1}), 1.0), ContractViolation);
  EXPECT_THROW(discounted_return(with_rewards({1}), 0.0), ContractViolation);
}

TEST(TrajectoryInvariants, LengthAndRewards) {
  std::vector<StepRecord> none;
  EXPECT_THROW(Trajectory(none, 3, 0), ContractViolation);
  std::vector<StepRecord> two(2, {Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(1), 1.0});
  EXPECT_THROW(Trajectory(two, 1, 0), ContractViolation);
  EXPECT_THROW(with_rewards({std::nan("")}), ContractViolation);
  std::vector<StepRecord> mixed = {{Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(1), 0.0},
                                   {Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(1), 0.0}};
  EXPECT_THROW(Trajectory(mixed, 5, 0), ContractViolation);
}

TEST(Rollout, DegenerateDeterministicEnvironment) {
  ConstantEnv env;
  const auto policy = linear_policy(1, 1e-12, ParamVector::Constant(1, 0.2));
  RngStream rng(3);
  const Trajectory traj = rollout(env, policy, rng);
  ASSERT_EQ(traj.size(), 3u);
  for (std::size_t t = 0; t < 3; ++t) {
    EXPECT_EQ(traj[t].state(0), 0.5);
    EXPECT_NEAR(traj[t].action(0), 0.1, 1e-6);
  }
  EXPECT_EQ(traj.behavior_params_id(), policy.id());
}

TEST(Rollout, NonFiniteStateNamesTheStep) {
  BrokenEnv env;
  const auto policy = linear_policy(1, 1.0, ParamVector::Zero(1));
  RngStream rng(1);
  try {
    rollout(env, policy, rng);
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("step 2"), std::string::npos) << e.what();
  }
  try {
    batch_rollout(BrokenEnv(), policy, 3, 9);
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("trajectory 0"), std::string::npos) << e.what();
  }
}

TEST(Rollout, TabularSameSeedSameTrajectory) {
  const TabularEnv env(default_oracle_mdp(), 5, 0.9);
  const SoftmaxTabularPolicy policy(2, 2);
  auto e1 = env.clone(), e2 = env.clone();
  RngStream a(77), b(77);
  EXPECT_TRUE(same(rollout(*e1, policy, a), rollout(*e2, policy, b)));
}

TEST(Rollout, StateVisitFrequenciesMatchEnumeration) {
  const TabularMDP mdp = default_oracle_mdp();
  const int H = 3;
  const SoftmaxTabularPolicy policy = oracle_target_policy();
  // Exact probability of being in state 1 at each step.
  std::vector<double> exact(H, 0.0);
  for (const auto& e : enumerate_trajectories(mdp, policy, H, 0.9))
    for (int h = 0; h < H; ++h)
      if (e.states[h] == 1) exact[h] += e.probability;
  const int n = 100000;
  const auto trajs = batch_rollout(TabularEnv(mdp, H, 0.9), policy, n, 2024);
  for (int h = 0; h < H; ++h) {
    double count = 0.0;
    for (const auto& t : trajs) count += t[h].state(0) == 1.0;
    const double p = exact[h];
    EXPECT_NEAR(count / n, p, 3.0 * std::sqrt(p * (1 - p) / n)) << "step " << h;
  }
}

TEST(BatchRollout, SingletonMatchesDerivedStreamZero) {
  CartPoleEnv env;
  const auto policy = linear_policy(4, 1.0, ParamVector::Constant(4, 0.1));
  const auto batch = batch_rollout(env, policy, 1, 55);
  auto local = env.clone();
  RngStream rng = RngStream::derive(55, 0);
  EXPECT_TRUE(same(batch[0], rollout(*local, policy, rng)));
  EXPECT_EQ(batch[0].master_seed(), 55u);
  EXPECT_EQ(batch[0].index(), 0u);
}

TEST(BatchRollout, DeterministicAcrossCallsAndThreadCounts) {
  CartPoleEnv env;
  const auto policy = linear_policy(4, 1.0, ParamVector::Constant(4, -0.3));
  const auto a = batch_rollout(env, policy, 25, 8);
  const auto b = batch_rollout(env, policy, 25, 8);
  const auto c = batch_rollout(env, policy, 25, 8, 4);
  ASSERT_EQ(a.size(), 25u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_TRUE(same(a[i], b[i]));
    EXPECT_TRUE(same(a[i], c[i]));
    EXPECT_LE(a[i].size(), 100u);
    EXPECT_EQ(a[i].index(), i);
  }
}

TEST(BatchRollout, RejectsEmptyBatch) {
  CartPoleEnv env;
  const auto policy = linear_policy(4, 1.0, ParamVector::Zero(4));
  EXPECT_THROW(batch_rollout(env, policy, 0, 1), ContractViolation);
}

TEST(BatchRollout, DimensionMismatchIsRejected) {
  CartPoleEnv env;
  const auto policy = linear_policy(2, 1.0, ParamVector::Zero(2));
  EXPECT_THROW(batch_rollout(env, policy, 1, 1), ContractViolation);
}

TEST(Jsonl, RoundTrip) {
  MountainCarEnv env(20);
  const auto policy = linear_policy(2, 1.0, ParamVector::Constant(2, 0.4));
  const auto trajs = batch_rollout(env, policy, 3, 12);
  std::stringstream buf;
  write_jsonl(buf, trajs);
  const auto back = read_jsonl(buf);
  ASSERT_EQ(back.size(), trajs.size());
  for (std::size_t i = 0; i < trajs.size(); ++i) {
    EXPECT_TRUE(same(trajs[i], back[i]));
    EXPECT_EQ(back[i].horizon_cap(), 20);
    EXPECT_EQ(back[i].master_seed(), 12u);
    EXPECT_EQ(back[i].index(), i);
  }
}
