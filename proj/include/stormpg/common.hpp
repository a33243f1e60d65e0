#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace stormpg {

/// Flat policy parameter vector; also the carrier for gradient estimates.
using ParamVector = Eigen::VectorXd;

/// Opaque identity of a parameter vector (a hash of its exact bit pattern).
using ParamsId = std::uint64_t;

/// Raised when a caller breaks a documented precondition.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Raised when a simulation or estimate produces a non-finite number.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

ParamsId params_id(const ParamVector& params);

std::string format_params_id(ParamsId id);

inline void require(bool condition, const std::string& message) {
  if (!condition) throw ContractViolation(message);
}

bool all_finite(const Eigen::Ref<const Eigen::VectorXd>& v);

}  // namespace stormpg
