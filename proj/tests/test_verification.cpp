#include "stormpg/verification.hpp"

#include <gtest/gtest.h>

using namespace stormpg;

namespace {

// Linear Gaussian policy whose score has the wrong sign.
class SignFlipPolicy : public Policy {
 public:
  SignFlipPolicy() : inner_(GaussianPolicyConfig{MeanKind::linear, 3, 1, 0, true, 1.0}) {
    init_params(inner_.params());
  }
  std::unique_ptr<Policy> clone() const override { return std::make_unique<SignFlipPolicy>(*this); }
  Eigen::Index param_count() const override { return inner_.param_count(); }
  int state_dim() const override { return 3; }
  int action_dim() const override { return 1; }
  Eigen::VectorXd sample_action(const Eigen::VectorXd& s, RngStream& rng) const override {
    return inner_.sample_action(s, rng);
  }
  double log_prob(const Eigen::VectorXd& s, const Eigen::VectorXd& a) const override {
    return inner_.log_prob(s, a);
  }
  ParamVector grad_log_prob(const Eigen::VectorXd& s, const Eigen::VectorXd& a) const override {
    return -inner_.grad_log_prob(s, a);
  }
  nlohmann::json describe() const override {
    auto d = inner_.describe();
    d["type"] = "sign_flip";
    return d;
  }

 protected:
  void on_params_changed() override { inner_.set_params(params()); }

 private:
  GaussianPolicy inner_;
};

GradcheckOptions small_options() {
  GradcheckOptions o;
  o.fd_cases = 20;
  o.mc_samples = 20000;
  o.form_cases = 100;
  o.exact_instances = 10;
  return o;
}

}  // namespace

TEST(Gradcheck, DefaultSuitePasses) {
  const auto results = run_gradcheck_suite(small_options());
  ASSERT_FALSE(results.empty());
  for (const auto& r : results) EXPECT_TRUE(r.passed) << r.name << " statistic " << r.statistic;
  const auto report = gradcheck_report(results);
  EXPECT_TRUE(report.at("passed").get<bool>());
}

TEST(Gradcheck, SignFlippedScoreIsCaught) {
  const SignFlipPolicy broken;
  const auto r = check_score_fd(broken, 10, 3);
  EXPECT_FALSE(r.passed);
  EXPECT_GT(r.statistic, r.threshold);

  auto options = small_options();
  options.fd_policies = {std::make_shared<SignFlipPolicy>()};
  const auto results = run_gradcheck_suite(options);
  EXPECT_FALSE(results.front().passed);
  EXPECT_FALSE(gradcheck_report(results).at("passed").get<bool>());
}

TEST(Gradcheck, CorrectPolicyPassesScoreCheck) {
  const GaussianPolicy ok(GaussianPolicyConfig{MeanKind::mlp, 3, 2, 8, false, 0.7});
  EXPECT_TRUE(check_score_fd(ok, 20, 4).passed);
  EXPECT_TRUE(check_score_fd(SoftmaxTabularPolicy(3, 4), 20, 5).passed);
}

TEST(Gradcheck, IsEstimatorWithEqualPoliciesIsUnbiased) {
  const auto mdp = default_oracle_mdp();
  const auto r = check_unbiasedness(EstimatorKind::is_gpomdp, mdp, oracle_target_policy(),
                                    oracle_target_policy(), kOracleGamma, kOracleHorizon, 20000, 9);
  EXPECT_TRUE(r.passed);
  EXPECT_LT(r.statistic, r.threshold);
}
