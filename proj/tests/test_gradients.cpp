#include "stormpg/environments.hpp"
#include "stormpg/gradients.hpp"
#include "stormpg/oracle.hpp"
#include "stormpg/verification.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace stormpg;

namespace {

GaussianPolicy linear_policy(double w) {
  ParamVector p(1);
  p << w;
  return GaussianPolicy({MeanKind::linear, 1, 1, 0, false, 1.0}, p);
}

GaussianPolicy biased_policy(double w, double b) {
  ParamVector p(2);
  p << w, b;
  return GaussianPolicy({MeanKind::linear, 1, 1, 0, true, 1.0}, p);
}

StepRecord step(double s, double a, double r) {
  return {Eigen::VectorXd::Constant(1, s), Eigen::VectorXd::Constant(1, a), r};
}

// Scores under w = 0.5, sigma = 1: (a - w s) s = 1 and -1.
Trajectory two_step(ParamsId id, double r0 = 1.0, double r1 = 2.0) {
  return Trajectory({step(2.0, 1.5, r0), step(1.0, -0.5, r1)}, 2, id);
}

std::vector<Trajectory> oracle_batch(const Policy& policy, int n, std::uint64_t seed) {
  const TabularEnv env(default_oracle_mdp(), kOracleHorizon, kOracleGamma);
  return batch_rollout(env, policy, n, seed);
}

}  // namespace

TEST(Reinforce, SingleStepIsScoreTimesReward) {
  const auto policy = linear_policy(0.5);
  const Trajectory traj({step(2.0, 1.5, 3.0)}, 1, policy.id());
  EXPECT_DOUBLE_EQ(reinforce_estimate(traj, policy, 0.9).vector(0), 3.0);
}

TEST(Reinforce, TwoStepExample) {
  const auto policy = linear_policy(0.5);
  EXPECT_DOUBLE_EQ(reinforce_estimate(two_step(policy.id()), policy, 0.5).vector(0), 0.0);
}

TEST(Gpomdp, TwoStepExample) {
  const auto policy = linear_policy(0.5);
  const auto traj = two_step(policy.id());
  // 1 * 1 + (1 - 1) * 0.5 * 2
  EXPECT_DOUBLE_EQ(gpomdp_estimate(traj, policy, 0.5).vector(0), 1.0);
  // reward-to-go: 2 * 1 + 1 * (-1)
  EXPECT_DOUBLE_EQ(gpomdp_estimate_alt(traj, policy, 0.5).vector(0), 1.0);
}

TEST(Gpomdp, EqualsReinforceAtHorizonOne) {
  const auto policy = oracle_target_policy();
  for (const auto& traj : [&] {
         const TabularEnv env(default_oracle_mdp(), 1, 0.9);
         return batch_rollout(env, policy, 20, 3);
       }()) {
    const auto a = gpomdp_estimate(traj, policy, 0.9).vector;
    const auto b = reinforce_estimate(traj, policy, 0.9).vector;
    EXPECT_LE((a - b).cwiseAbs().maxCoeff(), 1e-15);
  }
}

TEST(Gpomdp, FormsAgreeOnRandomTrajectories) {
  const auto policy = oracle_target_policy();
  for (const auto& traj : oracle_batch(policy, 200, 11)) {
    const auto a = gpomdp_estimate(traj, policy, kOracleGamma).vector;
    const auto b = gpomdp_estimate_alt(traj, policy, kOracleGamma).vector;
    EXPECT_LE((a - b).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Gpomdp, SingleTrajectoryBaselineAnnihilates) {
  const auto policy = oracle_target_policy();
  const auto trajs = oracle_batch(policy, 1, 5);
  const auto b = BaselineSpec::per_step_mean(trajs, kOracleGamma);
  EXPECT_EQ(gpomdp_estimate(trajs[0], policy, kOracleGamma, b).vector.norm(), 0.0);
}

TEST(Gpomdp, PerStepMeanValues) {
  const auto policy = linear_policy(0.5);
  std::vector<Trajectory> trajs{two_step(policy.id(), 1.0, 2.0),
                                Trajectory({step(0.0, 0.0, 3.0)}, 2, policy.id())};
  const auto b = BaselineSpec::per_step_mean(trajs, 0.5);
  ASSERT_EQ(b.values.size(), 2u);
  EXPECT_DOUBLE_EQ(b.values[0], 2.0);
  EXPECT_DOUBLE_EQ(b.values[1], 0.5);
}

TEST(Gpomdp, ZeroRewardsGiveZero) {
  const auto policy = linear_policy(0.5);
  const auto traj = two_step(policy.id(), 0.0, 0.0);
  EXPECT_EQ(gpomdp_estimate(traj, policy, 0.9).vector.norm(), 0.0);
  EXPECT_EQ(reinforce_estimate(traj, policy, 0.9).vector.norm(), 0.0);
  EXPECT_EQ(is_gpomdp_estimate(traj, policy, policy, 0.9).vector.norm(), 0.0);
}

TEST(Gpomdp, RejectsTrajectoryFromOtherParameters) {
  const auto policy = linear_policy(0.5);
  const auto other = linear_policy(0.25);
  const auto traj = two_step(other.id());
  EXPECT_THROW(gpomdp_estimate(traj, policy, 0.9), ContractViolation);
  EXPECT_THROW(reinforce_estimate(traj, policy, 0.9), ContractViolation);
  EXPECT_THROW(is_gpomdp_estimate(traj, other, policy, 0.9), ContractViolation);
}

TEST(Gpomdp, ExpectationMatchesExactGradientForAnyConstantBaseline) {
  const auto mdp = default_oracle_mdp();
  const auto policy = oracle_target_policy();
  const auto exact = exact_gradient(mdp, policy, kOracleGamma, kOracleHorizon);
  const auto all = enumerate_trajectories(mdp, policy, kOracleHorizon, kOracleGamma);
  for (const auto& baseline :
       {BaselineSpec::zero(), BaselineSpec::constant({0.7, -1.3, 2.5}),
        BaselineSpec::constant({10.0, 10.0, 10.0})}) {
    ParamVector mean = ParamVector::Zero(policy.param_count());
    for (const auto& e : all) {
      const auto traj = to_trajectory(e, mdp, kOracleHorizon, policy.id());
      mean += e.probability * gpomdp_estimate(traj, policy, kOracleGamma, baseline).vector;
    }
    EXPECT_LE((mean - exact).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Gpomdp, ShiftedRewardsWithMatchingBaselineAreIdentical) {
  const auto mdp = default_oracle_mdp();
  const auto shifted = mdp.with_rewards(1.0, 4.0);
  const auto policy = oracle_target_policy();
  std::vector<double> shift;
  for (int h = 0; h < kOracleHorizon; ++h) shift.push_back(4.0 * std::pow(kOracleGamma, h));
  const auto a = enumerate_trajectories(mdp, policy, kOracleHorizon, kOracleGamma);
  for (const auto& e : a) {
    const auto t0 = to_trajectory(e, mdp, kOracleHorizon, policy.id());
    const auto t1 = to_trajectory(e, shifted, kOracleHorizon, policy.id());
    const auto d0 = gpomdp_estimate(t0, policy, kOracleGamma).vector;
    const auto d1 = gpomdp_estimate(t1, policy, kOracleGamma, BaselineSpec::constant(shift)).vector;
    EXPECT_LE((d0 - d1).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Gpomdp, NormBoundHoldsForSoftmax) {
  const auto policy = oracle_target_policy();
  ScoreMonitor monitor;
  for (const auto& traj : oracle_batch(policy, 500, 8)) {
    const auto d = gpomdp_estimate(traj, policy, kOracleGamma, BaselineSpec::zero(), &monitor);
    EXPECT_TRUE(gpomdp_norm_bound_holds(d, std::sqrt(2.0), 2.0, kOracleGamma));
  }
  EXPECT_LE(monitor.max_norm, std::sqrt(2.0));
  EXPECT_EQ(monitor.observations, 500 * kOracleHorizon);
}

TEST(ImportanceWeights, SamePolicyIsOne) {
  const auto policy = oracle_target_policy();
  for (const auto& traj : oracle_batch(policy, 20, 2))
    for (double w : is_weights(policy, policy, traj)) EXPECT_EQ(w, 1.0);
}

TEST(ImportanceWeights, GaussianBiasShiftExample) {
  const auto target = biased_policy(0.5, 0.2);
  const auto behavior = biased_policy(0.5, 0.0);
  const auto traj = two_step(behavior.id());
  // step 0: means 1.2 vs 1.0 at a = 1.5; step 1: 0.7 vs 0.5 at a = -0.5
  const double l0 = -0.5 * 0.3 * 0.3 + 0.5 * 0.5 * 0.5;
  const double l1 = -0.5 * 1.2 * 1.2 + 0.5 * 1.0 * 1.0;
  EXPECT_NEAR(is_weight(target, behavior, traj, 0), std::exp(l0), 1e-14);
  EXPECT_NEAR(is_weight(target, behavior, traj, 1), std::exp(l0 + l1), 1e-14);
  const auto all = is_weights(target, behavior, traj);
  EXPECT_NEAR(all[1], std::exp(l0 + l1), 1e-14);
}

TEST(ImportanceWeights, ExpectationIsOneUnderBehavior) {
  const auto mdp = default_oracle_mdp();
  const auto target = oracle_target_policy();
  const auto behavior = oracle_behavior_policy();
  const auto all = enumerate_trajectories(mdp, behavior, kOracleHorizon, kOracleGamma);
  for (std::size_t h = 0; h < static_cast<std::size_t>(kOracleHorizon); ++h) {
    double mean = 0.0;
    for (const auto& e : all)
      mean += e.probability *
              is_weight(target, behavior, to_trajectory(e, mdp, kOracleHorizon, behavior.id()), h);
    EXPECT_NEAR(mean, 1.0, 1e-12) << "h = " << h;
  }

  // Monte Carlo: within 4 standard errors.
  const auto trajs = oracle_batch(behavior, 40000, 17);
  double sum = 0.0, sum_sq = 0.0;
  for (const auto& t : trajs) {
    const double w = is_weight(target, behavior, t, kOracleHorizon - 1);
    sum += w;
    sum_sq += w * w;
  }
  const double n = static_cast<double>(trajs.size());
  const double mean = sum / n;
  const double se = std::sqrt((sum_sq / n - mean * mean) / n);
  EXPECT_LE(std::abs(mean - 1.0), 4.0 * se);
}

TEST(ImportanceWeights, CapClipsEachWeight) {
  ParamVector far(4);
  far << 3.0, -3.0, -3.0, 3.0;
  const SoftmaxTabularPolicy target(2, 2, far);
  const auto behavior = oracle_behavior_policy();
  bool clipped = false;
  for (const auto& traj : oracle_batch(behavior, 50, 4)) {
    const auto raw = is_weights(target, behavior, traj);
    const auto capped = is_weights(target, behavior, traj, 2.0);
    for (std::size_t h = 0; h < raw.size(); ++h) {
      EXPECT_EQ(capped[h], std::min(raw[h], 2.0));
      clipped = clipped || raw[h] > 2.0;
    }
  }
  EXPECT_TRUE(clipped);
  EXPECT_THROW(is_weights(target, behavior, oracle_batch(behavior, 1, 1)[0], 0.0),
               ContractViolation);
}

TEST(ImportanceWeights, ArchitectureMismatchThrows) {
  const auto a = linear_policy(0.5);
  const auto b = biased_policy(0.5, 0.0);
  EXPECT_THROW(is_weights(a, b, two_step(b.id())), ContractViolation);
}

TEST(IsGpomdp, SameParametersEqualsGpomdp) {
  const auto policy = oracle_target_policy();
  for (const auto& traj : oracle_batch(policy, 50, 21)) {
    const auto a = is_gpomdp_estimate(traj, policy, policy, kOracleGamma);
    const auto b = gpomdp_estimate(traj, policy, kOracleGamma);
    EXPECT_EQ(a.vector, b.vector);
    EXPECT_EQ(a.target_params_id, policy.id());
    EXPECT_EQ(a.behavior_params_id, policy.id());
  }
}

TEST(IsGpomdp, ExpectationMatchesTargetGradient) {
  const auto mdp = default_oracle_mdp();
  const auto target = oracle_target_policy();
  const auto behavior = oracle_behavior_policy();
  ParamVector mean = ParamVector::Zero(target.param_count());
  for (const auto& e : enumerate_trajectories(mdp, behavior, kOracleHorizon, kOracleGamma))
    mean += e.probability *
            is_gpomdp_estimate(to_trajectory(e, mdp, kOracleHorizon, behavior.id()), target, behavior,
                               kOracleGamma)
                .vector;
  const auto exact = exact_gradient(mdp, target, kOracleGamma, kOracleHorizon);
  EXPECT_LE((mean - exact).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(BatchMean, Examples) {
  GradientEstimate a{ParamVector::Constant(2, 3.0)};
  EXPECT_EQ(batch_mean({a}).vector, a.vector);
  GradientEstimate b{-a.vector};
  const auto m = batch_mean({a, b});
  EXPECT_EQ(m.vector.norm(), 0.0);
  EXPECT_EQ(m.batch_size, 2);
  EXPECT_THROW(batch_mean({}), ContractViolation);
  GradientEstimate c{a.vector, EstimatorKind::reinforce};
  EXPECT_THROW(batch_mean({a, c}), ContractViolation);
}

TEST(BatchMean, MatchesCompensatedSum) {
  RngStream rng(99);
  std::vector<GradientEstimate> list;
  for (int i = 0; i < 25; ++i) {
    ParamVector v(6);
    for (int j = 0; j < 6; ++j) v(j) = std::pow(10.0, 3.0 * rng.uniform()) * rng.normal();
    list.push_back({v});
  }
  const auto mean = batch_mean(list).vector;
  for (int j = 0; j < 6; ++j) {
    long double sum = 0.0L, comp = 0.0L;
    for (const auto& e : list) {
      const long double x = e.vector(j);
      const long double t = sum + x;
      comp += std::fabs(sum) >= std::fabs(x) ? (sum - t) + x : (x - t) + sum;
      sum = t;
    }
    const double ref = static_cast<double>((sum + comp) / 25.0L);
    EXPECT_NEAR(mean(j), ref, 1e-12 * std::max(1.0, std::abs(ref)));
  }
}

TEST(BatchGpomdp, ThreadCountDoesNotChangeResult) {
  const auto policy = oracle_target_policy();
  const auto trajs = oracle_batch(policy, 64, 31);
  ScoreMonitor m1, m4;
  const auto a = batch_gpomdp(trajs, policy, kOracleGamma, BaselineSpec::zero(), 1, &m1);
  const auto b = batch_gpomdp(trajs, policy, kOracleGamma, BaselineSpec::zero(), 4, &m4);
  EXPECT_EQ(a.vector, b.vector);
  EXPECT_EQ(m1.observations, m4.observations);
  EXPECT_EQ(m1.max_norm, m4.max_norm);
  const auto behavior = oracle_behavior_policy();
  const auto btrajs = oracle_batch(behavior, 64, 32);
  EXPECT_EQ(batch_is_gpomdp(btrajs, policy, behavior, kOracleGamma, 5.0, BaselineSpec::zero(), 1).vector,
            batch_is_gpomdp(btrajs, policy, behavior, kOracleGamma, 5.0, BaselineSpec::zero(), 3).vector);
}
