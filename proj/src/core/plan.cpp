#include "orch/core/plan.hpp"

#include <set>

#include "orch/error.hpp"

namespace orch {

std::string_view to_string(PromptStatus s) noexcept {
  switch (s) {
    case PromptStatus::draft: return "draft";
    case PromptStatus::refined: return "refined";
    case PromptStatus::failed: return "failed";
  }
  return "draft";
}

PromptStatus parse_prompt_status(std::string_view s) {
  if (s == "draft") return PromptStatus::draft;
  if (s == "refined") return PromptStatus::refined;
  if (s == "failed") return PromptStatus::failed;
  throw Error(ErrorCode::invalid_argument, "status: '" + std::string(s) + "'");
}

void PromptSpec::check() const {
  if (subtask_id.empty()) throw Error(ErrorCode::invalid_argument, "subtask_id: must be non-empty");
  if (system_prompt.empty()) throw Error(ErrorCode::invalid_argument, "system_prompt: must be non-empty");
  if (revision < 0) throw Error(ErrorCode::invalid_argument, "revision: must be non-negative");
  if (status == PromptStatus::refined && (!validation || !validation->meets_threshold())) {
    throw Error(ErrorCode::invalid_argument,
                "validation: refined prompt '" + subtask_id + "' lacks a passing validation summary");
  }
}

FeatureSchema Plan::union_schema() const {
  std::vector<FeatureSchema> schemas;
  for (auto& s : subtasks) schemas.push_back(s.output_schema);
  return merge_schemas(schemas);
}

const Subtask* Plan::find_subtask(std::string_view id) const noexcept {
  for (auto& s : subtasks) {
    if (s.id == id) return &s;
  }
  return nullptr;
}

const PromptSpec* Plan::find_prompt(std::string_view subtask_id) const noexcept {
  for (auto& p : prompts) {
    if (p.subtask_id == subtask_id) return &p;
  }
  return nullptr;
}

PromptSpec* Plan::find_prompt(std::string_view subtask_id) noexcept {
  for (auto& p : prompts) {
    if (p.subtask_id == subtask_id) return &p;
  }
  return nullptr;
}

std::vector<std::string> validate_plan(const Plan& plan, const PlanCheckOptions& options) {
  std::vector<std::string> v;

  std::set<std::string> ids;
  std::map<std::string, std::string> field_owner;
  for (auto& s : plan.subtasks) {
    if (s.id.empty()) v.push_back("subtask with empty id");
    if (!ids.insert(s.id).second) v.push_back("duplicate subtask id '" + s.id + "'");
    for (auto& f : s.output_schema.fields()) {
      auto [it, fresh] = field_owner.emplace(f.name, s.id);
      if (!fresh) v.push_back("field '" + f.name + "' declared by both '" + it->second + "' and '" + s.id + "'");
    }
  }

  std::set<std::string> prompted;
  for (auto& p : plan.prompts) {
    if (!ids.contains(p.subtask_id)) v.push_back("prompt references unknown subtask '" + p.subtask_id + "'");
    if (!prompted.insert(p.subtask_id).second) v.push_back("more than one prompt for subtask '" + p.subtask_id + "'");
    try {
      p.check();
    } catch (const Error& e) {
      v.push_back(e.what());
    }
  }
  for (auto& s : plan.subtasks) {
    if (!prompted.contains(s.id)) v.push_back("subtask '" + s.id + "' has no prompt");
  }

  for (auto& [subtask_id, cases] : plan.synthetic_sets) {
    const Subtask* owner = plan.find_subtask(subtask_id);
    if (!owner) v.push_back("synthetic set references unknown subtask '" + subtask_id + "'");
    for (auto& c : cases) {
      if (c.subtask_id != subtask_id) {
        v.push_back("synthetic case '" + c.id + "' references unknown subtask '" + c.subtask_id + "'");
        continue;
      }
      if (!owner) continue;
      for (auto& err : conformance_errors(owner->output_schema, c.expected)) {
        v.push_back("synthetic case '" + c.id + "': " + err);
      }
    }
  }
  if (options.min_cases_per_subtask > 0) {
    for (auto& s : plan.subtasks) {
      auto it = plan.synthetic_sets.find(s.id);
      std::size_t n = it == plan.synthetic_sets.end() ? 0 : it->second.size();
      if (n < options.min_cases_per_subtask) {
        v.push_back("subtask '" + s.id + "' has " + std::to_string(n) + " synthetic cases, needs " +
                    std::to_string(options.min_cases_per_subtask));
      }
    }
  }

  std::optional<LabelOrder> labels;
  try {
    labels = plan.labels();
  } catch (const Error& e) {
    v.push_back(e.what());
  }
  if (labels) {
    try {
      auto program = dsl::parse_program(plan.logic_source);
      for (auto& d : dsl::check_program(program, plan.union_schema(), *labels)) {
        v.push_back("logic " + dsl::format(d));
      }
    } catch (const dsl::LogicError& e) {
      v.push_back(std::string("logic ") + e.what());
    }
  }
  return v;
}

}  // namespace orch
