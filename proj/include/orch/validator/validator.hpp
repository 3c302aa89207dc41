#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "orch/core/plan.hpp"
#include "orch/llm/gateway.hpp"

// Prompt validation against synthetic cases and the refinement loop that
// drives drafts to the pass-rate threshold.
namespace orch::validator {

enum class Verdict { passed, refine, failed };
std::string_view to_string(Verdict v) noexcept;

struct CaseResult {
  std::string case_id;
  FeatureSet expected;
  FeatureSet predicted;
  bool pass = false;
  std::vector<std::string> mismatched_fields;
  ParseStatus parse_status = ParseStatus::ok;
  std::string reasoning_excerpt;
  std::string error;
  SubtaskRun run;  // last repeat's run, kept for refinement feedback
};

struct ValidationReport {
  std::string subtask_id;
  int revision = 0;
  std::vector<CaseResult> cases;
  int passes = 0;
  int total = 0;
  Threshold threshold;
  Verdict verdict = Verdict::refine;

  [[nodiscard]] double pass_rate() const noexcept {
    return total ? static_cast<double>(passes) / static_cast<double>(total) : 0.0;
  }
  [[nodiscard]] ValidationSummary summary() const { return {passes, total, threshold, revision}; }
  [[nodiscard]] std::vector<FailureCase> failures(std::span<const SyntheticCase> cases) const;
};

struct ValidatorOptions {
  Threshold threshold;        // 4/5
  int max_iters = 5;          // refinement calls per subtask
  int repeats = 1;            // a case passes only if it passes every repeat
  std::size_t workers = 4;    // cases in flight within one revision
};

/// Field match after trim, case-fold and the field's alias map.
bool field_matches(const FieldSpec& field, std::string_view expected, std::string_view predicted);

/// Runs every case once per repeat. Transport failures fail that case only.
ValidationReport validate_prompt(const llm::Gateway& local, const Subtask& subtask, const PromptSpec& prompt,
                                 std::span<const SyntheticCase> cases, const ValidatorOptions& options = {});

using Refiner = std::function<PromptSpec(const PromptSpec& current, std::span<const FailureCase> failures)>;

struct LoopResult {
  PromptSpec prompt;  // refined, or the best revision marked failed
  std::vector<ValidationReport> history;
  std::vector<PromptSpec> revisions;  // parallel to history
  int refinements = 0;
  std::size_t best_index = 0;

  [[nodiscard]] bool passed() const noexcept { return prompt.status == PromptStatus::refined; }
};

LoopResult run_refinement_loop(const llm::Gateway& local, const Subtask& subtask, const PromptSpec& draft,
                               std::span<const SyntheticCase> cases, const Refiner& refine,
                               const ValidatorOptions& options = {});

nlohmann::json to_json(const ValidationReport& r);
nlohmann::json to_json(const LoopResult& r);

}  // namespace orch::validator
