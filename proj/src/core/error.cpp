#include "orch/error.hpp"

namespace orch {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid_argument";
    case ErrorCode::io: return "io";
    case ErrorCode::transport: return "transport";
    case ErrorCode::truncated: return "truncated";
    case ErrorCode::backend_refusal: return "backend_refusal";
    case ErrorCode::unseen_request: return "unseen_request";
    case ErrorCode::phase_violation: return "phase_violation";
    case ErrorCode::privacy_violation: return "privacy_violation";
    case ErrorCode::malformed_plan: return "malformed_plan";
    case ErrorCode::budget_exceeded: return "budget_exceeded";
    case ErrorCode::malformed_cases: return "malformed_cases";
    case ErrorCode::syntax_error: return "syntax_error";
    case ErrorCode::unknown_field: return "unknown_field";
    case ErrorCode::illegal_value: return "illegal_value";
    case ErrorCode::missing_default: return "missing_default";
    case ErrorCode::plan_invalid: return "plan_invalid";
    case ErrorCode::unrefined_prompts: return "unrefined_prompts";
    case ErrorCode::checksum_mismatch: return "checksum_mismatch";
    case ErrorCode::version_incompatible: return "version_incompatible";
    case ErrorCode::malformed: return "malformed";
    case ErrorCode::id_mismatch: return "id_mismatch";
  }
  return "unknown_error";
}

}  // namespace orch
