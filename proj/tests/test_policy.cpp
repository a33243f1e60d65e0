#include "stormpg/policy.hpp"
#include "stormpg/verification.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

using namespace stormpg;

namespace {

const double kHalfLogTwoPi = 0.5 * std::log(2.0 * std::numbers::pi);

GaussianPolicyConfig linear_config(int state_dim, bool bias = false, double sigma = 1.0) {
  return {MeanKind::linear, state_dim, 1, 0, bias, sigma};
}

GaussianPolicyConfig mlp_config(int state_dim, int hidden, int action_dim = 1, double sigma = 1.0) {
  return {MeanKind::mlp, state_dim, action_dim, hidden, false, sigma};
}

ParamVector random_vector(Eigen::Index n, std::uint64_t seed, double scale = 1.0) {
  RngStream rng(seed);
  ParamVector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = scale * rng.normal();
  return v;
}

}  // namespace

TEST(GaussianPolicyTest, ParamCounts) {
  EXPECT_EQ(GaussianPolicy(linear_config(4)).param_count(), 4);
  EXPECT_EQ(GaussianPolicy(linear_config(4, true)).param_count(), 5);
  EXPECT_EQ(GaussianPolicy(mlp_config(4, 64)).param_count(), 4 * 64 + 64 + 64 + 1);
  EXPECT_EQ(GaussianPolicy(mlp_config(2, 8, 3)).param_count(), 2 * 8 + 8 + 3 * 8 + 3);
}

TEST(GaussianPolicyTest, MlpFlattenOrder) {
  // W1 (2x3 row-major), b1, W2 (1x2), b2
  ParamVector p(2 * 3 + 2 + 2 + 1);
  p << 0.1, -0.2, 0.3, 0.4, 0.5, -0.6, 0.05, -0.05, 1.5, -2.0, 0.25;
  const GaussianPolicy policy(mlp_config(3, 2), p);
  Eigen::Vector3d s(1.0, -1.0, 2.0);
  const double h0 = std::tanh(0.1 * 1 - 0.2 * -1 + 0.3 * 2 + 0.05);
  const double h1 = std::tanh(0.4 * 1 + 0.5 * -1 - 0.6 * 2 - 0.05);
  EXPECT_NEAR(policy.mean(s)(0), 1.5 * h0 - 2.0 * h1 + 0.25, 1e-15);
}

TEST(GaussianPolicyTest, LinearBiasFeature) {
  ParamVector p(3);
  p << 2.0, -1.0, 0.5;
  const GaussianPolicy policy(linear_config(2, true), p);
  EXPECT_DOUBLE_EQ(policy.mean(Eigen::Vector2d(1.0, 3.0))(0), 2.0 - 3.0 + 0.5);
}

TEST(GaussianPolicyTest, LogProbExamples) {
  const GaussianPolicy zero(linear_config(2), ParamVector::Zero(2));
  const Eigen::Vector2d s(0.3, -0.7);
  EXPECT_NEAR(zero.log_prob(s, Eigen::VectorXd::Constant(1, 0.0)), -kHalfLogTwoPi, 1e-15);
  EXPECT_NEAR(zero.log_prob(s, Eigen::VectorXd::Constant(1, 2.0)), -2.0 - kHalfLogTwoPi, 1e-15);
  const GaussianPolicy wide(linear_config(2, false, 2.0), ParamVector::Zero(2));
  EXPECT_NEAR(wide.log_prob(s, Eigen::VectorXd::Constant(1, 2.0)), -0.5 - std::log(2.0) - kHalfLogTwoPi,
              1e-15);
}

TEST(GaussianPolicyTest, DensityIntegratesToOne) {
  const GaussianPolicy policy(mlp_config(2, 5, 1, 0.7), random_vector(21, 4, 0.5));
  const Eigen::Vector2d s(0.2, 0.9);
  const double mu = policy.mean(s)(0);
  const double h = 1e-3;
  double total = 0.0;
  for (double a = mu - 10.0; a <= mu + 10.0; a += h)
    total += std::exp(policy.log_prob(s, Eigen::VectorXd::Constant(1, a))) * h;
  EXPECT_NEAR(total, 1.0, 1e-4);
}

TEST(GaussianPolicyTest, ScoreClosedForm) {
  const GaussianPolicy policy(linear_config(2), ParamVector::Zero(2));
  const ParamVector g = policy.grad_log_prob(Eigen::Vector2d(1.0, 0.0), Eigen::VectorXd::Constant(1, 2.0));
  EXPECT_DOUBLE_EQ(g(0), 2.0);
  EXPECT_DOUBLE_EQ(g(1), 0.0);
  ParamVector p(2);
  p << 0.3, -1.1;
  const GaussianPolicy other(linear_config(2), p);
  const Eigen::Vector2d s(0.5, 2.0);
  EXPECT_EQ(other.grad_log_prob(s, other.mean(s)).norm(), 0.0);
}

TEST(GaussianPolicyTest, ScoreMatchesFiniteDifferences) {
  EXPECT_TRUE(check_score_fd(GaussianPolicy(linear_config(4, true)), 100, 1).passed);
  EXPECT_TRUE(check_score_fd(GaussianPolicy(mlp_config(4, 64)), 100, 2).passed);
  EXPECT_TRUE(check_score_fd(GaussianPolicy(mlp_config(3, 7, 2, 0.5)), 100, 3).passed);
}

TEST(GaussianPolicyTest, ScoreHasZeroMean) {
  const GaussianPolicy policy(mlp_config(3, 6), random_vector(31, 9, 0.5));
  const Eigen::Vector3d s(0.1, -0.4, 0.8);
  RngStream rng(10);
  const int n = 100000;
  Eigen::MatrixXd scores(policy.param_count(), n);
  for (int i = 0; i < n; ++i) scores.col(i) = policy.grad_log_prob(s, policy.sample_action(s, rng));
  const ParamVector mean = scores.rowwise().mean();
  const ParamVector sd = ((scores.colwise() - mean).array().square().rowwise().sum() / (n - 1)).sqrt();
  for (Eigen::Index j = 0; j < mean.size(); ++j)
    if (sd(j) > 0) EXPECT_LT(std::abs(mean(j)) / (sd(j) / std::sqrt(n)), 4.0) << "coordinate " << j;
}

TEST(GaussianPolicyTest, SamplingMoments) {
  const GaussianPolicy zero(linear_config(2), ParamVector::Zero(2));
  const Eigen::Vector2d s(1.0, 1.0);
  RngStream rng(11);
  const int n = 100000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) sum += zero.sample_action(s, rng)(0);
  EXPECT_LT(std::abs(sum / n), 3.0 / std::sqrt(n));

  const GaussianPolicy policy(mlp_config(2, 4, 1, 0.8), random_vector(17, 12));
  const double mu = policy.mean(s)(0);
  const int m = 1000000;
  double s1 = 0.0, s2 = 0.0;
  for (int i = 0; i < m; ++i) {
    const double a = policy.sample_action(s, rng)(0);
    s1 += a;
    s2 += a * a;
  }
  const double mean = s1 / m, var = s2 / m - mean * mean;
  EXPECT_NEAR(mean, mu, 4.0 * 0.8 / std::sqrt(m));
  EXPECT_NEAR(var, 0.64, 4.0 * 0.64 * std::sqrt(2.0 / m));
}

TEST(GaussianPolicyTest, DegenerateSigmaReturnsMean) {
  ParamVector p(2);
  p << 0.7, -0.2;
  const GaussianPolicy policy(linear_config(2, false, 1e-12), p);
  RngStream rng(1);
  const Eigen::Vector2d s(1.0, 2.0);
  EXPECT_NEAR(policy.sample_action(s, rng)(0), 0.3, 1e-6);
}

TEST(GaussianPolicyTest, SetParamsRoundTripAndValidation) {
  GaussianPolicy policy(mlp_config(4, 8), random_vector(49, 13));
  const Eigen::Vector4d s(0.1, 0.2, -0.3, 0.4);
  const double before = policy.mean(s)(0);
  const ParamsId id = policy.id();
  policy.set_params(ParamVector(policy.params()));
  EXPECT_EQ(policy.mean(s)(0), before);
  EXPECT_EQ(policy.id(), id);
  EXPECT_THROW(policy.set_params(ParamVector::Zero(3)), ContractViolation);
  ParamVector bad = policy.params();
  bad(0) = std::nan("");
  EXPECT_THROW(policy.set_params(bad), ContractViolation);
  EXPECT_THROW(GaussianPolicy(linear_config(2, false, 0.0)), ContractViolation);
}

TEST(GaussianPolicyTest, InitializationScale) {
  const auto policy = GaussianPolicy::initialized(mlp_config(4, 64), 3);
  const ParamVector& p = policy.params();
  // b1 occupies [256, 320) and b2 the last entry.
  EXPECT_EQ(p.segment(256, 64).norm(), 0.0);
  EXPECT_EQ(p(p.size() - 1), 0.0);
  double sq = 0.0;
  for (int i = 0; i < 256; ++i) sq += p(i) * p(i);
  EXPECT_NEAR(std::sqrt(sq / 256), 0.01, 0.002);
  EXPECT_EQ(GaussianPolicy::initialized(mlp_config(4, 64), 3).id(), policy.id());
  EXPECT_NE(GaussianPolicy::initialized(mlp_config(4, 64), 4).id(), policy.id());
}

TEST(SoftmaxPolicyTest, ProbabilitiesAndScore) {
  ParamVector logits(6);
  logits << 1.0, 2.0, 3.0, 0.0, 0.0, 0.0;
  const SoftmaxTabularPolicy policy(2, 3, logits);
  const Eigen::VectorXd p0 = policy.probabilities(0);
  const double z = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
  EXPECT_NEAR(p0(2), std::exp(3.0) / z, 1e-15);
  EXPECT_NEAR(p0.sum(), 1.0, 1e-15);
  EXPECT_NEAR(policy.probabilities(1)(1), 1.0 / 3.0, 1e-15);
  const ParamVector g = policy.grad_log_prob(Eigen::VectorXd::Constant(1, 0), Eigen::VectorXd::Constant(1, 2));
  EXPECT_NEAR(g(0), -std::exp(1.0) / z, 1e-15);
  EXPECT_NEAR(g(2), 1.0 - std::exp(3.0) / z, 1e-15);
  EXPECT_EQ(g.tail(3).norm(), 0.0);
  EXPECT_NEAR(policy.log_prob_index(0, 2), std::log(std::exp(3.0) / z), 1e-14);
}

TEST(SoftmaxPolicyTest, LargeLogitsStayFinite) {
  ParamVector logits(2);
  logits << 800.0, 0.0;
  const SoftmaxTabularPolicy policy(1, 2, logits);
  EXPECT_TRUE(std::isfinite(policy.log_prob_index(0, 1)));
  EXPECT_NEAR(policy.log_prob_index(0, 1), -800.0, 1e-9);
}

TEST(SoftmaxPolicyTest, RejectsOutOfRangeIndices) {
  const SoftmaxTabularPolicy policy(2, 2);
  EXPECT_THROW(policy.log_prob(Eigen::VectorXd::Constant(1, 2), Eigen::VectorXd::Constant(1, 0)),
               ContractViolation);
  EXPECT_THROW(policy.log_prob(Eigen::VectorXd::Constant(1, 0), Eigen::VectorXd::Constant(1, 0.5)),
               ContractViolation);
}

TEST(ScoreMonitorTest, TracksMaxAndExceedances) {
  ScoreMonitor m;
  m.bound = 2.0;
  for (double v : {1.0, 3.0, 0.5, 2.5}) m.observe(v);
  EXPECT_EQ(m.observations, 4);
  EXPECT_EQ(m.exceed_count, 2);
  EXPECT_EQ(m.max_norm, 3.0);
  EXPECT_TRUE(m.exceeded());
}

TEST(Serialization, JsonRoundTrip) {
  const GaussianPolicy mlp(mlp_config(4, 16, 1, 0.5), random_vector(97, 21));
  const auto back = policy_from_json(nlohmann::json::parse(params_to_json(mlp).dump()));
  EXPECT_EQ(back->params(), mlp.params());
  EXPECT_EQ(back->describe(), mlp.describe());
  const SoftmaxTabularPolicy tab(3, 2, random_vector(6, 22));
  EXPECT_EQ(policy_from_json(params_to_json(tab))->params(), tab.params());
}

TEST(Serialization, BinaryRoundTrip) {
  const GaussianPolicy linear(linear_config(3, true, 2.0), random_vector(4, 23));
  std::stringstream buf;
  write_params_binary(buf, linear);
  const std::string bytes = buf.str();
  EXPECT_EQ(bytes.substr(0, 4), "SPGP");
  const auto back = read_params_binary(buf);
  EXPECT_EQ(back->params(), linear.params());
  EXPECT_EQ(back->describe(), linear.describe());
  std::stringstream truncated(bytes.substr(0, bytes.size() - 3));
  EXPECT_ANY_THROW(read_params_binary(truncated));
}

TEST(Serialization, RejectsWrongLength) {
  const GaussianPolicy linear(linear_config(3));
  auto j = params_to_json(linear);
  j["params"].push_back(1.0);
  EXPECT_THROW(policy_from_json(j), ContractViolation);
}
