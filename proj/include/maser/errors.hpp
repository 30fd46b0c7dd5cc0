#pragma once

#include <stdexcept>
#include <string>

namespace maser {

enum class ErrorCode {
  invalid_argument,
  truncation_failure,
  convergence_failure,
  route_disagreement,
  singular_system,
  step_underflow,
  singular_covariance,
  no_finite_likelihood,
  insensitive_design_point,
  state_explosion,
  unsupported_observation,
  parse_error,
};

const char* to_string(ErrorCode code) noexcept;

/// Every library failure is reported through this type; code() is stable
/// and is what the CLI prints in its machine-readable error line.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace maser
