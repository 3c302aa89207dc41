#include "orch/validator/validator.hpp"

#include "orch/core/serialize.hpp"
#include "orch/error.hpp"
#include "orch/executor/executor.hpp"
#include "orch/executor/extraction.hpp"
#include "orch/util/parallel.hpp"
#include "orch/util/text.hpp"

namespace orch::validator {

using json = nlohmann::json;

std::string_view to_string(Verdict v) noexcept {
  switch (v) {
    case Verdict::passed: return "passed";
    case Verdict::refine: return "refine";
    case Verdict::failed: return "failed";
  }
  return "?";
}

bool field_matches(const FieldSpec& field, std::string_view expected, std::string_view predicted) {
  auto e = normalize_value(field, expected);
  auto p = normalize_value(field, predicted);
  if (e && p) return util::casefold(*e) == util::casefold(*p);
  return util::casefold(util::trim(expected)) == util::casefold(util::trim(predicted));
}

std::vector<FailureCase> ValidationReport::failures(std::span<const SyntheticCase> cases) const {
  std::vector<FailureCase> out;
  for (auto& r : this->cases) {
    if (r.pass) continue;
    for (auto& c : cases) {
      if (c.id == r.case_id) {
        out.push_back({c, r.run});
        break;
      }
    }
  }
  return out;
}

ValidationReport validate_prompt(const llm::Gateway& local, const Subtask& subtask, const PromptSpec& prompt,
                                 std::span<const SyntheticCase> cases, const ValidatorOptions& options) {
  executor::require_local(local.profile());
  if (local.phase() != llm::Phase::execution) {
    throw Error(ErrorCode::phase_violation, "validation runs on the execution-phase gateway");
  }
  if (options.repeats < 1) throw Error(ErrorCode::invalid_argument, "validation_repeats: must be at least 1");
  if (cases.empty()) throw Error(ErrorCode::invalid_argument, "cases: subtask '" + subtask.id + "' has no synthetic cases");

  ValidationReport report;
  report.subtask_id = subtask.id;
  report.revision = prompt.revision;
  report.threshold = options.threshold;
  report.total = static_cast<int>(cases.size());
  report.cases.resize(cases.size());

  util::parallel_for(cases.size(), options.workers, [&](std::size_t i) {
    const SyntheticCase& c = cases[i];
    CaseResult& r = report.cases[i];
    r.case_id = c.id;
    r.expected = c.expected;
    r.pass = true;
    for (int rep = 0; rep < options.repeats; ++rep) {
      SubtaskRun run = executor::extract(local, prompt, subtask, c.id, c.input_text, static_cast<std::uint64_t>(rep));
      bool ok = run.parse_status != ParseStatus::unparseable;
      std::vector<std::string> mismatched;
      for (auto& f : subtask.output_schema.fields()) {
        if (!field_matches(f, c.expected.get(f.name), run.output.get(f.name))) mismatched.push_back(f.name);
      }
      ok = ok && mismatched.empty();
      if (!ok || rep == 0) {
        r.predicted = run.output;
        r.mismatched_fields = std::move(mismatched);
        r.parse_status = run.parse_status;
        r.reasoning_excerpt = util::excerpt(run.reasoning, 200);
        r.error = run.error;
        r.run = std::move(run);
      }
      if (!ok) {
        r.pass = false;
        break;
      }
    }
  });

  for (auto& r : report.cases) report.passes += r.pass ? 1 : 0;
  report.verdict = options.threshold.met_by(report.passes, report.total) ? Verdict::passed : Verdict::refine;
  return report;
}

LoopResult run_refinement_loop(const llm::Gateway& local, const Subtask& subtask, const PromptSpec& draft,
                               std::span<const SyntheticCase> cases, const Refiner& refine,
                               const ValidatorOptions& options) {
  if (options.max_iters < 1) throw Error(ErrorCode::invalid_argument, "max_iters: must be at least 1");
  if (!refine) throw Error(ErrorCode::invalid_argument, "refine: no refiner given");

  LoopResult out;
  PromptSpec current = draft;
  for (;;) {
    ValidationReport report = validate_prompt(local, subtask, current, cases, options);
    out.history.push_back(report);
    out.revisions.push_back(current);
    if (report.verdict == Verdict::passed) {
      out.prompt = current;
      out.prompt.status = PromptStatus::refined;
      out.prompt.validation = report.summary();
      out.best_index = out.history.size() - 1;
      return out;
    }
    if (out.refinements == options.max_iters) break;
    auto failures = report.failures(cases);
    current = refine(current, failures);
    ++out.refinements;
  }

  out.history.back().verdict = Verdict::failed;
  // strict comparison keeps the lowest revision among equal scores
  for (std::size_t i = 1; i < out.history.size(); ++i) {
    if (out.history[i].passes > out.history[out.best_index].passes) out.best_index = i;
  }
  out.prompt = out.revisions[out.best_index];
  out.prompt.status = PromptStatus::failed;
  out.prompt.validation = out.history[out.best_index].summary();
  return out;
}

json to_json(const ValidationReport& r) {
  json cases = json::array();
  for (auto& c : r.cases) {
    cases.push_back({{"case_id", c.case_id},
                     {"pass", c.pass},
                     {"expected", json_io::to_json(c.expected)},
                     {"predicted", json_io::to_json(c.predicted)},
                     {"mismatched_fields", c.mismatched_fields},
                     {"parse_status", to_string(c.parse_status)},
                     {"reasoning_excerpt", c.reasoning_excerpt},
                     {"error", c.error}});
  }
  return {{"subtask_id", r.subtask_id}, {"revision", r.revision},   {"passes", r.passes},
          {"total", r.total},           {"pass_rate", r.pass_rate()}, {"threshold", r.threshold.to_string()},
          {"verdict", to_string(r.verdict)}, {"cases", cases}};
}

json to_json(const LoopResult& r) {
  json history = json::array();
  for (std::size_t i = 0; i < r.history.size(); ++i) {
    json h = to_json(r.history[i]);
    h["instructions"] = r.revisions[i].instructions;
    history.push_back(std::move(h));
  }
  return {{"subtask_id", r.prompt.subtask_id},
          {"status", to_string(r.prompt.status)},
          {"selected_revision", r.prompt.revision},
          {"refinements", r.refinements},
          {"history", history}};
}

}  // namespace orch::validator
