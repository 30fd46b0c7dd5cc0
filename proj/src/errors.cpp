#include "maser/errors.hpp"

namespace maser {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid-argument";
    case ErrorCode::truncation_failure: return "truncation-failure";
    case ErrorCode::convergence_failure: return "convergence-failure";
    case ErrorCode::route_disagreement: return "route-disagreement";
    case ErrorCode::singular_system: return "singular-system";
    case ErrorCode::step_underflow: return "step-underflow";
    case ErrorCode::singular_covariance: return "singular-covariance";
    case ErrorCode::no_finite_likelihood: return "no-finite-likelihood";
    case ErrorCode::insensitive_design_point: return "insensitive-design-point";
    case ErrorCode::state_explosion: return "state-explosion";
    case ErrorCode::unsupported_observation: return "unsupported-observation";
    case ErrorCode::parse_error: return "parse-error";
  }
  return "unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

}  // namespace maser
