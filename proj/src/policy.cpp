#include "stormpg/policy.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <numbers>
#include <ostream>

namespace stormpg {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

const double kLogTwoPi = std::log(2.0 * std::numbers::pi);

std::string to_string(MeanKind kind) { return kind == MeanKind::linear ? "linear" : "mlp"; }

}  // namespace

// ---------------------------------------------------------------------------
// Policy

void Policy::set_params(const ParamVector& params) {
  require(params.size() == param_count(), "parameter vector length " +
                                              std::to_string(params.size()) + " != " +
                                              std::to_string(param_count()));
  require(params.allFinite(), "parameter vector has non-finite entries");
  params_ = params;
  id_ = params_id(params_);
  on_params_changed();
}

void Policy::init_params(ParamVector params) { set_params(params); }

std::unique_ptr<Policy> Policy::with_params(const ParamVector& params) const {
  auto copy = clone();
  copy->set_params(params);
  return copy;
}

void ScoreMonitor::observe(double norm) {
  ++observations;
  if (norm > max_norm) max_norm = norm;
  if (norm > bound) ++exceed_count;
}

// ---------------------------------------------------------------------------
// GaussianPolicy

Eigen::Index GaussianPolicy::param_count_for(const GaussianPolicyConfig& c) {
  if (c.mean == MeanKind::linear)
    return static_cast<Eigen::Index>(c.action_dim) * (c.state_dim + (c.bias_feature ? 1 : 0));
  return static_cast<Eigen::Index>(c.hidden) * c.state_dim + c.hidden +
         static_cast<Eigen::Index>(c.action_dim) * c.hidden + c.action_dim;
}

GaussianPolicy::GaussianPolicy(const GaussianPolicyConfig& config)
    : GaussianPolicy(config, ParamVector::Zero(param_count_for(config))) {}

GaussianPolicy::GaussianPolicy(const GaussianPolicyConfig& config, const ParamVector& params)
    : config_(config) {
  require(config_.state_dim > 0 && config_.action_dim > 0, "policy dimensions must be positive");
  require(config_.mean == MeanKind::linear || config_.hidden > 0, "MLP hidden width must be positive");
  require(config_.sigma > 0.0 && std::isfinite(config_.sigma), "sigma must be positive");
  init_params(params);
}

GaussianPolicy GaussianPolicy::initialized(const GaussianPolicyConfig& config, std::uint64_t seed,
                                           double init_scale) {
  ParamVector p = ParamVector::Zero(param_count_for(config));
  RngStream rng(seed);
  const auto fill = [&](Eigen::Index begin, Eigen::Index count) {
    for (Eigen::Index i = begin; i < begin + count; ++i) p[i] = init_scale * rng.normal();
  };
  if (config.mean == MeanKind::linear) {
    const int features = config.state_dim + (config.bias_feature ? 1 : 0);
    for (int k = 0; k < config.action_dim; ++k) fill(k * features, config.state_dim);
  } else {
    const Eigen::Index w1 = static_cast<Eigen::Index>(config.hidden) * config.state_dim;
    fill(0, w1);
    fill(w1 + config.hidden, static_cast<Eigen::Index>(config.action_dim) * config.hidden);
  }
  return GaussianPolicy(config, p);
}

std::unique_ptr<Policy> GaussianPolicy::clone() const {
  return std::make_unique<GaussianPolicy>(*this);
}

void GaussianPolicy::check_dims(const Eigen::VectorXd& state) const {
  require(state.size() == config_.state_dim, "state dimension mismatch");
}

Eigen::VectorXd GaussianPolicy::features(const Eigen::VectorXd& state) const {
  if (!config_.bias_feature) return state;
  Eigen::VectorXd f(state.size() + 1);
  f << state, 1.0;
  return f;
}

Eigen::VectorXd GaussianPolicy::mean(const Eigen::VectorXd& state) const {
  check_dims(state);
  const double* p = params().data();
  const int A = config_.action_dim;
  if (config_.mean == MeanKind::linear) {
    const Eigen::VectorXd f = features(state);
    return Eigen::Map<const RowMatrix>(p, A, f.size()) * f;
  }
  const int S = config_.state_dim;
  const int H = config_.hidden;
  Eigen::Map<const RowMatrix> w1(p, H, S);
  Eigen::Map<const Eigen::VectorXd> b1(p + H * S, H);
  Eigen::Map<const RowMatrix> w2(p + H * S + H, A, H);
  Eigen::Map<const Eigen::VectorXd> b2(p + H * S + H + A * H, A);
  const Eigen::VectorXd hidden = (w1 * state + b1).array().tanh().matrix();
  return w2 * hidden + b2;
}

Eigen::VectorXd GaussianPolicy::sample_action(const Eigen::VectorXd& state, RngStream& rng) const {
  Eigen::VectorXd a = mean(state);
  for (Eigen::Index k = 0; k < a.size(); ++k) a[k] += config_.sigma * rng.normal();
  return a;
}

double GaussianPolicy::log_prob(const Eigen::VectorXd& state, const Eigen::VectorXd& action) const {
  require(action.size() == config_.action_dim, "action dimension mismatch");
  const double var = config_.sigma * config_.sigma;
  const double sq = (action - mean(state)).squaredNorm();
  return -sq / (2.0 * var) - 0.5 * config_.action_dim * (kLogTwoPi + std::log(var));
}

ParamVector GaussianPolicy::grad_log_prob(const Eigen::VectorXd& state,
                                          const Eigen::VectorXd& action) const {
  require(action.size() == config_.action_dim, "action dimension mismatch");
  check_dims(state);
  const double var = config_.sigma * config_.sigma;
  const int A = config_.action_dim;
  ParamVector grad(param_count());

  if (config_.mean == MeanKind::linear) {
    const Eigen::VectorXd f = features(state);
    const Eigen::VectorXd delta = (action - mean(state)) / var;
    Eigen::Map<RowMatrix>(grad.data(), A, f.size()) = delta * f.transpose();
    return grad;
  }

  // Forward pass, then backpropagate d log pi / d mu = (a - mu) / sigma^2.
  const int S = config_.state_dim;
  const int H = config_.hidden;
  const double* p = params().data();
  Eigen::Map<const RowMatrix> w1(p, H, S);
  Eigen::Map<const Eigen::VectorXd> b1(p + H * S, H);
  Eigen::Map<const RowMatrix> w2(p + H * S + H, A, H);
  Eigen::Map<const Eigen::VectorXd> b2(p + H * S + H + A * H, A);
  const Eigen::VectorXd hidden = (w1 * state + b1).array().tanh().matrix();
  const Eigen::VectorXd delta = (action - (w2 * hidden + b2)) / var;
  const Eigen::VectorXd back =
      ((w2.transpose() * delta).array() * (1.0 - hidden.array().square())).matrix();

  double* g = grad.data();
  Eigen::Map<RowMatrix>(g, H, S) = back * state.transpose();
  Eigen::Map<Eigen::VectorXd>(g + H * S, H) = back;
  Eigen::Map<RowMatrix>(g + H * S + H, A, H) = delta * hidden.transpose();
  Eigen::Map<Eigen::VectorXd>(g + H * S + H + A * H, A) = delta;
  return grad;
}

nlohmann::json GaussianPolicy::describe() const {
  nlohmann::json j{{"type", "gaussian"},
                   {"mean", to_string(config_.mean)},
                   {"state_dim", config_.state_dim},
                   {"action_dim", config_.action_dim},
                   {"sigma", config_.sigma},
                   {"param_count", param_count()}};
  if (config_.mean == MeanKind::mlp) {
    j["hidden"] = config_.hidden;
    j["activation"] = "tanh";
    j["order"] = "W1(row-major),b1,W2(row-major),b2";
  } else {
    j["bias_feature"] = config_.bias_feature;
    j["order"] = "W(row-major)";
  }
  return j;
}

// ---------------------------------------------------------------------------
// SoftmaxTabularPolicy

SoftmaxTabularPolicy::SoftmaxTabularPolicy(int num_states, int num_actions)
    : SoftmaxTabularPolicy(num_states, num_actions,
                           ParamVector::Zero(static_cast<Eigen::Index>(num_states) * num_actions)) {}

SoftmaxTabularPolicy::SoftmaxTabularPolicy(int num_states, int num_actions, const ParamVector& logits)
    : num_states_(num_states), num_actions_(num_actions) {
  require(num_states_ >= 1 && num_actions_ >= 1, "softmax policy needs states and actions");
  init_params(logits);
}

std::unique_ptr<Policy> SoftmaxTabularPolicy::clone() const {
  return std::make_unique<SoftmaxTabularPolicy>(*this);
}

int SoftmaxTabularPolicy::state_index(const Eigen::VectorXd& state) const {
  require(state.size() == 1, "tabular state must be a single index");
  const int s = static_cast<int>(state[0]);
  require(s == state[0] && s >= 0 && s < num_states_, "tabular state index out of range");
  return s;
}

int SoftmaxTabularPolicy::action_index(const Eigen::VectorXd& action) const {
  require(action.size() == 1, "tabular action must be a single index");
  const int a = static_cast<int>(action[0]);
  require(a == action[0] && a >= 0 && a < num_actions_, "tabular action index out of range");
  return a;
}

Eigen::VectorXd SoftmaxTabularPolicy::probabilities(int state) const {
  const Eigen::VectorXd row = params().segment(static_cast<Eigen::Index>(state) * num_actions_, num_actions_);
  const Eigen::VectorXd e = (row.array() - row.maxCoeff()).exp().matrix();
  return e / e.sum();
}

double SoftmaxTabularPolicy::log_prob_index(int state, int action) const {
  const Eigen::VectorXd row = params().segment(static_cast<Eigen::Index>(state) * num_actions_, num_actions_);
  const double m = row.maxCoeff();
  return row[action] - m - std::log((row.array() - m).exp().sum());
}

Eigen::VectorXd SoftmaxTabularPolicy::sample_action(const Eigen::VectorXd& state, RngStream& rng) const {
  const Eigen::VectorXd p = probabilities(state_index(state));
  const double u = rng.uniform();
  double acc = 0.0;
  int chosen = num_actions_ - 1;
  for (int a = 0; a < num_actions_; ++a) {
    acc += p[a];
    if (u < acc) {
      chosen = a;
      break;
    }
  }
  return Eigen::VectorXd::Constant(1, chosen);
}

double SoftmaxTabularPolicy::log_prob(const Eigen::VectorXd& state, const Eigen::VectorXd& action) const {
  return log_prob_index(state_index(state), action_index(action));
}

ParamVector SoftmaxTabularPolicy::grad_log_prob(const Eigen::VectorXd& state,
                                                const Eigen::VectorXd& action) const {
  const int s = state_index(state);
  const int a = action_index(action);
  ParamVector grad = ParamVector::Zero(param_count());
  auto row = grad.segment(static_cast<Eigen::Index>(s) * num_actions_, num_actions_);
  row = -probabilities(s);
  row[a] += 1.0;
  return grad;
}

nlohmann::json SoftmaxTabularPolicy::describe() const {
  return {{"type", "softmax_tabular"},
          {"num_states", num_states_},
          {"num_actions", num_actions_},
          {"param_count", param_count()},
          {"order", "theta[s,a] row-major"}};
}

// ---------------------------------------------------------------------------
// Serialization

std::unique_ptr<Policy> make_policy(const nlohmann::json& header, const ParamVector& params) {
  const auto type = header.at("type").get<std::string>();
  if (type == "softmax_tabular")
    return std::make_unique<SoftmaxTabularPolicy>(header.at("num_states").get<int>(),
                                                  header.at("num_actions").get<int>(), params);
  require(type == "gaussian", "unknown policy type '" + type + "'");
  GaussianPolicyConfig c;
  const auto mean = header.at("mean").get<std::string>();
  require(mean == "linear" || mean == "mlp", "unknown mean function '" + mean + "'");
  c.mean = mean == "linear" ? MeanKind::linear : MeanKind::mlp;
  c.state_dim = header.at("state_dim").get<int>();
  c.action_dim = header.at("action_dim").get<int>();
  c.sigma = header.at("sigma").get<double>();
  if (c.mean == MeanKind::mlp)
    c.hidden = header.at("hidden").get<int>();
  else
    c.bias_feature = header.value("bias_feature", false);
  return std::make_unique<GaussianPolicy>(c, params);
}

nlohmann::json params_to_json(const Policy& policy) {
  const auto& p = policy.params();
  return {{"header", policy.describe()},
          {"params", std::vector<double>(p.data(), p.data() + p.size())}};
}

std::unique_ptr<Policy> policy_from_json(const nlohmann::json& j) {
  const auto values = j.at("params").get<std::vector<double>>();
  return make_policy(j.at("header"),
                     Eigen::Map<const ParamVector>(values.data(), static_cast<Eigen::Index>(values.size())));
}

namespace {

template <typename T>
void write_le(std::ostream& out, T value) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T read_le(std::istream& in) {
  unsigned char bytes[sizeof(T)];
  in.read(reinterpret_cast<char*>(bytes), sizeof(T));
  if (!in) throw std::runtime_error("truncated parameter file");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

}  // namespace

void write_params_binary(std::ostream& out, const Policy& policy) {
  const std::string header = policy.describe().dump();
  out.write("SPGP", 4);
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(header.size()));
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  const auto& p = policy.params();
  write_le<std::uint64_t>(out, static_cast<std::uint64_t>(p.size()));
  for (Eigen::Index i = 0; i < p.size(); ++i) write_le<double>(out, p[i]);
}

std::unique_ptr<Policy> read_params_binary(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  if (!in || std::string(magic, 4) != "SPGP") throw std::runtime_error("not a parameter file");
  const auto header_len = read_le<std::uint32_t>(in);
  std::string header(header_len, '\0');
  in.read(header.data(), header_len);
  if (!in) throw std::runtime_error("truncated parameter header");
  const auto count = read_le<std::uint64_t>(in);
  ParamVector p(static_cast<Eigen::Index>(count));
  for (Eigen::Index i = 0; i < p.size(); ++i) p[i] = read_le<double>(in);
  return make_policy(nlohmann::json::parse(header), p);
}

}  // namespace stormpg
