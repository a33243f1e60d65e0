#include "stormpg/optimizer.hpp"

#include <cmath>

namespace stormpg {

OptimizerState OptimizerState::ascent(double lr, double decay) {
  OptimizerState s;
  s.kind = OptimizerKind::ascent;
  s.lr = lr;
  s.decay = decay;
  return s;
}

OptimizerState OptimizerState::adam(double lr, double decay) {
  OptimizerState s = ascent(lr, decay);
  s.kind = OptimizerKind::adam;
  return s;
}

double OptimizerState::current_lr() const {
  return lr * std::pow(decay, static_cast<double>(step));
}

ParamVector adam_transform(OptimizerState& opt, const ParamVector& grad) {
  if (opt.first_moment.size() == 0) {
    opt.first_moment = ParamVector::Zero(grad.size());
    opt.second_moment = ParamVector::Zero(grad.size());
  }
  require(opt.first_moment.size() == grad.size() && opt.second_moment.size() == grad.size(),
          "Adam moments do not match the gradient dimension");
  const double lr_t = opt.current_lr();
  ++opt.step;
  opt.first_moment = opt.beta1 * opt.first_moment + (1.0 - opt.beta1) * grad;
  opt.second_moment = opt.beta2 * opt.second_moment + (1.0 - opt.beta2) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(opt.beta1, static_cast<double>(opt.step));
  const double c2 = 1.0 - std::pow(opt.beta2, static_cast<double>(opt.step));
  const Eigen::ArrayXd m_hat = opt.first_moment.array() / c1;
  const Eigen::ArrayXd v_hat = opt.second_moment.array() / c2;
  return (lr_t * m_hat / (v_hat.sqrt() + opt.epsilon)).matrix();
}

ParamVector optimizer_step(OptimizerState& opt, const ParamVector& grad) {
  if (opt.kind == OptimizerKind::adam) return adam_transform(opt, grad);
  const double lr_t = opt.current_lr();
  ++opt.step;
  return lr_t * grad;
}

OptimizerKind parse_optimizer_kind(const std::string& name) {
  if (name == "ascent" || name == "sgd") return OptimizerKind::ascent;
  if (name == "adam") return OptimizerKind::adam;
  throw ContractViolation("unknown optimizer '" + name + "'");
}

std::string to_string(OptimizerKind kind) {
  return kind == OptimizerKind::adam ? "adam" : "ascent";
}

namespace {
nlohmann::json vec(const ParamVector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }
ParamVector unvec(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const ParamVector>(v.data(), static_cast<Eigen::Index>(v.size()));
}
}  // namespace

nlohmann::json OptimizerState::to_json() const {
  return {{"kind", stormpg::to_string(kind)}, {"lr", lr},         {"beta1", beta1},
          {"beta2", beta2},                   {"epsilon", epsilon}, {"decay", decay},
          {"step", step},                     {"first_moment", vec(first_moment)},
          {"second_moment", vec(second_moment)}};
}

OptimizerState OptimizerState::from_json(const nlohmann::json& j) {
  OptimizerState s;
  s.kind = parse_optimizer_kind(j.at("kind").get<std::string>());
  s.lr = j.at("lr").get<double>();
  s.beta1 = j.at("beta1").get<double>();
  s.beta2 = j.at("beta2").get<double>();
  s.epsilon = j.at("epsilon").get<double>();
  s.decay = j.at("decay").get<double>();
  s.step = j.at("step").get<long>();
  s.first_moment = unvec(j.at("first_moment"));
  s.second_moment = unvec(j.at("second_moment"));
  return s;
}

}  // namespace stormpg
