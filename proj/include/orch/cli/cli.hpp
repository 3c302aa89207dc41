#pragma once

#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "orch/error.hpp"

namespace orch::cli {

enum Exit : int {
  kOk = 0,
  kOther = 1,
  kInvalidInput = 2,
  kPlannerFailure = 3,
  kTransport = 4,
  kFailedPrompts = 5,
  kTamper = 6,
  kPrivacyRefusal = 7,
};

/// Default exit code for an error raised outside bundle verification.
int exit_code_for(ErrorCode code) noexcept;

using EnvLookup = std::function<std::optional<std::string>(std::string_view)>;
EnvLookup process_env();

/// Entry point used by the binary and by in-process tests. `args` excludes
/// the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
        const EnvLookup& env = process_env());

}  // namespace orch::cli
