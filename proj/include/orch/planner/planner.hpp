#pragma once

#include <span>
#include <string>
#include <vector>

#include "orch/core/plan.hpp"
#include "orch/llm/gateway.hpp"
#include "orch/planner/templates.hpp"

// Cloud-phase planning. Nothing in this interface accepts document
// content: inputs are the task, the guideline, schemas and synthetic cases.
namespace orch::planner {

struct PlannerOptions {
  int max_repairs = 2;
  bool deterministic = false;  // epoch timestamps in provenance
  std::size_t workers = 4;     // concurrent synthetic-set generation
};

struct SyntheticBatch {
  std::vector<SyntheticCase> cases;
  std::vector<std::string> warnings;
  bool coverage_unreachable = false;
  int repairs = 0;
};

class Planner {
 public:
  /// The gateway must be in the planning phase.
  Planner(const llm::Gateway& cloud, TemplateSet templates, PlannerOptions options = {});

  /// Subtasks, draft prompts and parsed logic; no synthetic sets yet.
  /// Throws malformed_plan (reply never parsed) or budget_exceeded (parsed
  /// but still inconsistent after the repair budget).
  [[nodiscard]] Plan decompose(const TaskSpec& task) const;

  /// Exactly `count` cases whose expected outputs conform to the schema.
  /// Throws malformed_cases when the budget runs out.
  [[nodiscard]] SyntheticBatch generate_synthetic(const Subtask& subtask, std::string_view guideline, int count) const;

  /// Fills plan.synthetic_sets for every subtask; returns the warnings.
  std::vector<std::string> attach_synthetic(Plan& plan, std::string_view guideline) const;

  /// Next revision built from the failing cases and their reasoning traces.
  [[nodiscard]] PromptSpec refine_prompt(const TaskSummary& task, const Subtask& subtask,
                                         const PromptSpec& prompt, std::span<const FailureCase> failures) const;

  [[nodiscard]] const TemplateSet& templates() const noexcept { return templates_; }

 private:
  const llm::Gateway& cloud_;
  TemplateSet templates_;
  PlannerOptions options_;
};

/// Human-readable description of the expected JSON output for a schema.
std::string format_instructions(const FeatureSchema& schema);

/// Self-contained local-model system prompt: instructions, subtask
/// header, task context, guideline background, output format.
std::string compose_system_prompt(std::string_view instructions, std::string_view task_description,
                                  const Subtask& subtask, std::string_view format_notes);

/// Schema rendered for meta-prompts.
std::string describe_schema(const FeatureSchema& schema);

}  // namespace orch::planner
