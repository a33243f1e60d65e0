#pragma once

#include "stormpg/common.hpp"

#include <json.hpp>

#include <string>

namespace stormpg {

enum class OptimizerKind { ascent, adam };

/// Turns an ascent direction into a parameter step. lr_t = lr * decay^t.
struct OptimizerState {
  OptimizerKind kind = OptimizerKind::ascent;
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double decay = 1.0;
  long step = 0;
  ParamVector first_moment;
  ParamVector second_moment;

  static OptimizerState ascent(double lr, double decay = 1.0);
  static OptimizerState adam(double lr, double decay = 1.0);

  double current_lr() const;
  nlohmann::json to_json() const;
  static OptimizerState from_json(const nlohmann::json& j);
};

/// Bias-corrected Adam step lr_t * m_hat / (sqrt(v_hat) + eps), oriented for ascent.
ParamVector adam_transform(OptimizerState& opt, const ParamVector& grad);

/// Dispatches on opt.kind; plain ascent returns lr_t * grad.
ParamVector optimizer_step(OptimizerState& opt, const ParamVector& grad);

OptimizerKind parse_optimizer_kind(const std::string& name);
std::string to_string(OptimizerKind kind);

}  // namespace stormpg
