#pragma once

// Stochastic policies with analytic log-density and score function.

#include "stormpg/common.hpp"
#include "stormpg/rng.hpp"

#include <json.hpp>

#include <Eigen/Core>

#include <iosfwd>
#include <limits>
#include <memory>
#include <string>

namespace stormpg {

/// Common interface for parameterized policies pi_xi(a|s). The policy owns its
/// parameter vector; estimators evaluate other parameters through clones.
class Policy {
 public:
  virtual ~Policy() = default;

  virtual std::unique_ptr<Policy> clone() const = 0;
  virtual Eigen::Index param_count() const = 0;
  virtual int state_dim() const = 0;
  virtual int action_dim() const = 0;

  virtual Eigen::VectorXd sample_action(const Eigen::VectorXd& state, RngStream& rng) const = 0;
  virtual double log_prob(const Eigen::VectorXd& state, const Eigen::VectorXd& action) const = 0;
  /// Gradient of log_prob with respect to the parameters.
  virtual ParamVector grad_log_prob(const Eigen::VectorXd& state,
                                    const Eigen::VectorXd& action) const = 0;

  /// Architecture header used by serialization (shape, sigma, flatten order).
  virtual nlohmann::json describe() const = 0;

  const ParamVector& params() const { return params_; }
  void set_params(const ParamVector& params);
  ParamsId id() const { return id_; }

  std::unique_ptr<Policy> with_params(const ParamVector& params) const;

 protected:
  void init_params(ParamVector params);
  virtual void on_params_changed() {}

 private:
  ParamVector params_;
  ParamsId id_ = 0;
};

enum class MeanKind { linear, mlp };

struct GaussianPolicyConfig {
  MeanKind mean = MeanKind::mlp;
  int state_dim = 1;
  int action_dim = 1;
  /// MLP hidden width.
  int hidden = 64;
  /// Linear features: append a constant 1 to the raw state.
  bool bias_feature = false;
  double sigma = 1.0;
};

/// Gaussian policy N(mu_xi(s), sigma^2 I) with fixed sigma.
///
/// Flatten order:
///   linear: W (action_dim x feature_dim), row-major.
///   mlp:    W1 (hidden x state_dim) row-major, b1 (hidden),
///           W2 (action_dim x hidden) row-major, b2 (action_dim).
/// The MLP uses tanh hidden units and a linear head.
class GaussianPolicy : public Policy {
 public:
  explicit GaussianPolicy(const GaussianPolicyConfig& config);
  GaussianPolicy(const GaussianPolicyConfig& config, const ParamVector& params);

  /// Weights ~ N(0, init_scale^2), biases 0.
  static GaussianPolicy initialized(const GaussianPolicyConfig& config, std::uint64_t seed,
                                    double init_scale = 0.01);

  static Eigen::Index param_count_for(const GaussianPolicyConfig& config);

  std::unique_ptr<Policy> clone() const override;
  Eigen::Index param_count() const override { return param_count_for(config_); }
  int state_dim() const override { return config_.state_dim; }
  int action_dim() const override { return config_.action_dim; }

  Eigen::VectorXd mean(const Eigen::VectorXd& state) const;
  Eigen::VectorXd sample_action(const Eigen::VectorXd& state, RngStream& rng) const override;
  double log_prob(const Eigen::VectorXd& state, const Eigen::VectorXd& action) const override;
  ParamVector grad_log_prob(const Eigen::VectorXd& state,
                            const Eigen::VectorXd& action) const override;
  nlohmann::json describe() const override;

  const GaussianPolicyConfig& config() const { return config_; }
  double sigma() const { return config_.sigma; }

 private:
  Eigen::VectorXd features(const Eigen::VectorXd& state) const;
  void check_dims(const Eigen::VectorXd& state) const;

  GaussianPolicyConfig config_;
};

/// Softmax over a logit table theta[s, a] (row-major), for finite MDPs.
/// States and actions travel as 1-element vectors holding the index.
class SoftmaxTabularPolicy : public Policy {
 public:
  SoftmaxTabularPolicy(int num_states, int num_actions);
  SoftmaxTabularPolicy(int num_states, int num_actions, const ParamVector& logits);

  std::unique_ptr<Policy> clone() const override;
  Eigen::Index param_count() const override { return num_states_ * num_actions_; }
  int state_dim() const override { return 1; }
  int action_dim() const override { return 1; }
  int num_states() const { return num_states_; }
  int num_actions() const { return num_actions_; }

  Eigen::VectorXd probabilities(int state) const;
  double log_prob_index(int state, int action) const;
  Eigen::VectorXd sample_action(const Eigen::VectorXd& state, RngStream& rng) const override;
  double log_prob(const Eigen::VectorXd& state, const Eigen::VectorXd& action) const override;
  ParamVector grad_log_prob(const Eigen::VectorXd& state,
                            const Eigen::VectorXd& action) const override;
  nlohmann::json describe() const override;

 private:
  int state_index(const Eigen::VectorXd& state) const;
  int action_index(const Eigen::VectorXd& action) const;

  int num_states_;
  int num_actions_;
};

/// Running maximum of ||grad log pi|| against a configured bound M. Gaussian
/// scores are unbounded in the tails, so this only reports.
struct ScoreMonitor {
  double bound = std::numeric_limits<double>::infinity();
  double max_norm = 0.0;
  long observations = 0;
  long exceed_count = 0;

  void observe(double norm);
  bool exceeded() const { return exceed_count > 0; }
};

/// Policies rebuilt from a describe() header.
std::unique_ptr<Policy> make_policy(const nlohmann::json& header, const ParamVector& params);

/// {"header": describe(), "params": [...]}
nlohmann::json params_to_json(const Policy& policy);
std::unique_ptr<Policy> policy_from_json(const nlohmann::json& j);

/// Binary form: "SPGP" magic, u32 header length, header JSON, u64 count,
/// little-endian doubles.
void write_params_binary(std::ostream& out, const Policy& policy);
std::unique_ptr<Policy> read_params_binary(std::istream& in);

}  // namespace stormpg
