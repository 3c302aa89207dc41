#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "orch/core/plan.hpp"
#include "orch/llm/gateway.hpp"

// Running one prompt over one input and turning the reply into features.
// Shared by the executor (documents) and the validator (synthetic cases).
namespace orch::executor {

struct ParsedReply {
  std::string reasoning;
  FeatureSet output;
};

/// Accepts {"reasoning": ..., "output": {...}} or a flat object of fields.
/// Undeclared keys are ignored and omitted fields read as unknown. Returns
/// nullopt and fills `problems` when the reply cannot be used.
std::optional<ParsedReply> parse_reply(std::string_view reply, const FeatureSchema& schema,
                                       std::vector<std::string>& problems);

/// User turn sent after an unusable reply.
std::string format_repair_message(std::string_view input_text, const FeatureSchema& schema,
                                  const std::vector<std::string>& problems, std::string_view previous_reply);

/// One request plus at most one format-repair round-trip. Transport,
/// truncation and refusals after retries yield an unparseable all-unknown
/// run with the reason in `error`; replay misses and phase errors propagate.
SubtaskRun extract(const llm::Gateway& gateway, const PromptSpec& prompt, const Subtask& subtask,
                   std::string_view input_id, std::string_view input_text,
                   std::optional<std::uint64_t> seed = std::nullopt);

}  // namespace orch::executor
