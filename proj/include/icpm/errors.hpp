#pragma once

#include <stdexcept>
#include <string>

namespace icpm {

enum class ErrorCode {
  invalid_input,
  model_error,
  singular_vhc,
  numeric_error,
  no_crossing,
  section_infeasible,
  section_mismatch,
  invalid_orbit,
  invalid_weights,
  convergence_failure,
  linearization_failure,
  orbit_escape,
  config_error,
};

inline const char* to_string(ErrorCode c) {
  switch (c) {
    case ErrorCode::invalid_input: return "invalid-input";
    case ErrorCode::model_error: return "model-error";
    case ErrorCode::singular_vhc: return "singular-vhc";
    case ErrorCode::numeric_error: return "numeric-error";
    case ErrorCode::no_crossing: return "no-crossing";
    case ErrorCode::section_infeasible: return "section-infeasible";
    case ErrorCode::section_mismatch: return "section-mismatch";
    case ErrorCode::invalid_orbit: return "invalid-orbit";
    case ErrorCode::invalid_weights: return "invalid-weights";
    case ErrorCode::convergence_failure: return "convergence-failure";
    case ErrorCode::linearization_failure: return "linearization-failure";
    case ErrorCode::orbit_escape: return "orbit-escape";
    case ErrorCode::config_error: return "config-error";
  }
  return "unknown";
}

/// Library error carrying a machine-readable code alongside the message.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& msg)
      : std::runtime_error(std::string(to_string(code)) + ": " + msg), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& msg) {
  throw Error(code, msg);
}

}  // namespace icpm
