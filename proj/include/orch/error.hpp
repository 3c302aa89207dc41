#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace orch {

enum class ErrorCode {
  invalid_argument,
  io,
  // llm gateway
  transport,
  truncated,
  backend_refusal,
  unseen_request,
  phase_violation,
  privacy_violation,
  // planner
  malformed_plan,
  budget_exceeded,
  malformed_cases,
  // rule dsl
  syntax_error,
  unknown_field,
  illegal_value,
  missing_default,
  // bundle
  plan_invalid,
  unrefined_prompts,
  checksum_mismatch,
  version_incompatible,
  malformed,
  // evalkit
  id_mismatch,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every failure raised by the toolkit carries a stable code so callers
/// (and the CLI exit-code mapping) can branch on the failure class.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace orch
