#pragma once

#include <json.hpp>

#include "orch/core/plan.hpp"

// JSON forms of the domain types. Readers validate as they go and throw
// Error(malformed) with a path-like message on structural problems.
namespace orch::json_io {

using json = nlohmann::json;

json to_json(const FeatureSchema& schema);
FeatureSchema schema_from_json(const json& j);

/// JSON Schema for a {"reasoning", "output"} subtask reply.
json response_schema(const FeatureSchema& schema);

json to_json(const FeatureSet& set);
/// Raw string map; boolean JSON values become "true"/"false".
FeatureSet::Map feature_map_from_json(const json& j);

json to_json(const UserPrefs& prefs);
UserPrefs prefs_from_json(const json& j, const UserPrefs& defaults = {});

json to_json(const Subtask& s);
Subtask subtask_from_json(const json& j);

json to_json(const PromptSpec& p);
PromptSpec prompt_from_json(const json& j);

json to_json(const SyntheticCase& c);
SyntheticCase case_from_json(const json& j, const FeatureSchema& schema);

json to_json(const SubtaskRun& r);

json to_json(const Plan& plan);
/// Re-parses logic_source against the plan's schemas and labels.
Plan plan_from_json(const json& j);

/// Serialization with sorted keys, two-space indent, UTF-8, trailing newline.
std::string canonical_dump(const json& j);

json parse_json(std::string_view text, std::string_view what);

}  // namespace orch::json_io
