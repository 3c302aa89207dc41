#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "orch/core/types.hpp"
#include "orch/dsl/logic.hpp"

namespace orch {

struct Subtask {
  std::string id;
  std::string name;
  std::string description;
  std::string guideline_excerpt;
  FeatureSchema output_schema;

  bool operator==(const Subtask&) const = default;
};

enum class PromptStatus { draft, refined, failed };
std::string_view to_string(PromptStatus s) noexcept;
PromptStatus parse_prompt_status(std::string_view s);

/// Outcome of the validation run a prompt revision was judged on.
struct ValidationSummary {
  int passes = 0;
  int total = 0;
  Threshold threshold;
  int revision = 0;

  [[nodiscard]] double pass_rate() const noexcept {
    return total ? static_cast<double>(passes) / static_cast<double>(total) : 0.0;
  }
  [[nodiscard]] bool meets_threshold() const noexcept { return threshold.met_by(passes, total); }

  bool operator==(const ValidationSummary&) const = default;
};

struct PromptSpec {
  std::string subtask_id;
  std::string instructions;   // model-authored body
  std::string system_prompt;  // full self-contained prompt sent to the local model
  int revision = 0;
  PromptStatus status = PromptStatus::draft;
  std::optional<ValidationSummary> validation;

  /// Refined prompts must carry a passing summary.
  void check() const;

  bool operator==(const PromptSpec&) const = default;
};

struct SyntheticCase {
  std::string id;
  std::string subtask_id;
  std::string input_text;
  FeatureSet expected;

  bool operator==(const SyntheticCase&) const = default;
};

/// A synthetic case the local model got wrong, with what it produced.
struct FailureCase {
  SyntheticCase expected;
  SubtaskRun actual;
};

/// What the plan keeps of the task: the guideline is referenced by digest.
struct TaskSummary {
  std::string description;
  UserPrefs prefs;
  std::string guideline_sha256;

  bool operator==(const TaskSummary&) const = default;
};

struct Provenance {
  std::string planner_model;
  std::string created_at;
  std::map<std::string, std::string> template_digests;

  bool operator==(const Provenance&) const = default;
};

/// Planning output: subtasks, one prompt per subtask, synthesis logic and
/// synthetic validation sets. Holds no document content.
struct Plan {
  TaskSummary task;
  std::vector<Subtask> subtasks;
  std::vector<PromptSpec> prompts;
  std::string logic_source;
  dsl::SynthesisLogic logic;
  std::map<std::string, std::vector<SyntheticCase>> synthetic_sets;
  Provenance provenance;

  [[nodiscard]] LabelOrder labels() const { return task.prefs.labels(); }
  [[nodiscard]] FeatureSchema union_schema() const;
  [[nodiscard]] const Subtask* find_subtask(std::string_view id) const noexcept;
  [[nodiscard]] const PromptSpec* find_prompt(std::string_view subtask_id) const noexcept;
  [[nodiscard]] PromptSpec* find_prompt(std::string_view subtask_id) noexcept;

  bool operator==(const Plan&) const = default;
};

struct PlanCheckOptions {
  std::size_t min_cases_per_subtask = 0;
};

/// Cross-reference check; returns one message per violation (empty when
/// the plan is consistent). Never throws.
std::vector<std::string> validate_plan(const Plan& plan, const PlanCheckOptions& options = {});

}  // namespace orch
