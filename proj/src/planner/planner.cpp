#include "orch/planner/planner.hpp"

#include <algorithm>
#include <cctype>
#include <optional>
#include <set>

#include "orch/core/serialize.hpp"
#include "orch/error.hpp"
#include "orch/util/io.hpp"
#include "orch/util/parallel.hpp"
#include "orch/util/sha256.hpp"
#include "orch/util/text.hpp"

namespace orch::planner {

namespace {

using json = nlohmann::json;

struct Rejection {
  bool structural = false;
  std::vector<std::string> problems;

  void fail_structural(std::string p) {
    structural = true;
    problems.push_back(std::move(p));
  }
};

std::optional<json> reply_object(std::string_view reply, Rejection& r) {
  auto obj = util::find_json_object(reply);
  if (!obj) {
    r.fail_structural("the reply contains no JSON object");
    return std::nullopt;
  }
  try {
    return json::parse(*obj);
  } catch (const json::parse_error& e) {
    r.fail_structural(std::string("the JSON object does not parse: ") + e.what());
    return std::nullopt;
  }
}

bool is_subtask_id(std::string_view id) {
  return !id.empty() && std::all_of(id.begin(), id.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
  });
}

std::string bullet_list(const std::vector<std::string>& items) {
  std::string out;
  for (auto& i : items) out += "- " + i + "\n";
  return out;
}

std::string numbered_labels(const UserPrefs& prefs) {
  std::string out;
  for (std::size_t i = 0; i < prefs.output_labels.size(); ++i) {
    out += std::to_string(i + 1) + ". " + prefs.output_labels[i] + "\n";
  }
  return out;
}

std::string describe_prefs(const UserPrefs& prefs) {
  std::string out;
  out += "Maximum number of subtasks: " + std::to_string(prefs.max_subtasks) + "\n";
  if (!prefs.output_format_notes.empty()) out += "Output format notes: " + prefs.output_format_notes + "\n";
  if (!prefs.include_entities.empty()) out += "Entities to extract: " + util::join(prefs.include_entities, ", ") + "\n";
  if (!prefs.exclude_entities.empty()) out += "Entities to ignore: " + util::join(prefs.exclude_entities, ", ") + "\n";
  return out;
}

std::string instructions_of(const json& j) {
  for (const char* key : {"instructions", "prompt"}) {
    if (auto it = j.find(key); it != j.end() && it->is_string()) return it->get<std::string>();
  }
  return {};
}

}  // namespace

std::string describe_schema(const FeatureSchema& schema) { return json_io::to_json(schema).dump(2); }

std::string format_instructions(const FeatureSchema& schema) {
  std::string out =
      "Reply with a single JSON object of the form {\"reasoning\": \"<short explanation>\", \"output\": {...}}.\n"
      "\"output\" must contain these fields:\n";
  for (auto& f : schema.fields()) {
    out += "- " + f.name + (f.required ? " (required): " : " (optional): ");
    switch (f.kind) {
      case FieldKind::categorical: {
        out += "one of ";
        for (auto& v : f.allowed) out += "\"" + v + "\", ";
        out += "or \"unknown\"";
        break;
      }
      case FieldKind::boolean: out += "true, false, or \"unknown\""; break;
      case FieldKind::text: out += "free text, or \"unknown\""; break;
    }
    out += "\n";
  }
  out += "Use \"unknown\" whenever the input does not settle a field.";
  return out;
}

std::string compose_system_prompt(std::string_view instructions, std::string_view task_description,
                                  const Subtask& subtask, std::string_view format_notes) {
  std::string out(util::trim(instructions));
  out += "\n\nSubtask id: " + subtask.id + "\nSubtask: " + subtask.name + "\n";
  if (!subtask.description.empty()) out += subtask.description + "\n";
  out += "\nTask context:\n" + std::string(util::trim(task_description)) + "\n";
  out += "\nGuideline background:\n" + std::string(util::trim(subtask.guideline_excerpt)) + "\n";
  out += "\nOutput format:\n" + format_instructions(subtask.output_schema) + "\n";
  if (!util::trim(format_notes).empty()) out += "Additional formatting notes: " + std::string(util::trim(format_notes)) + "\n";
  return out;
}

Planner::Planner(const llm::Gateway& cloud, TemplateSet templates, PlannerOptions options)
    : cloud_(cloud), templates_(std::move(templates)), options_(options) {
  if (cloud_.phase() != llm::Phase::planning) {
    throw Error(ErrorCode::phase_violation, "the planner needs a planning-phase gateway");
  }
  if (options_.max_repairs < 0) throw Error(ErrorCode::invalid_argument, "max_repairs: must be non-negative");
}

Plan Planner::decompose(const TaskSpec& task) const {
  const UserPrefs& prefs = task.preferences();
  const LabelOrder labels = prefs.labels();
  const std::string original = render(templates_.get("decompose"),
                                      {{"task", task.task_description()},
                                       {"guideline", task.guideline()},
                                       {"labels", numbered_labels(prefs)},
                                       {"preferences", describe_prefs(prefs)},
                                       {"max_subtasks", std::to_string(prefs.max_subtasks)}});
  std::string user = original;
  Rejection last;

  for (int attempt = 0; attempt <= options_.max_repairs; ++attempt) {
    const std::string reply = cloud_.complete(cloud_.request(templates_.get("planner_system"), user)).raw_text;
    Rejection r;
    auto j = reply_object(reply, r);
    Plan plan;
    if (j) {
      plan.task = TaskSummary{task.task_description(), prefs, util::sha256_hex(task.guideline())};
      auto subtasks = j->find("subtasks");
      if (subtasks == j->end() || !subtasks->is_array()) {
        r.fail_structural("\"subtasks\" must be an array");
      } else {
        for (auto& js : *subtasks) {
          try {
            Subtask s = json_io::subtask_from_json(js);
            std::string body = instructions_of(js);
            if (util::trim(body).empty()) {
              r.fail_structural("subtask '" + s.id + "' has no \"instructions\"");
              continue;
            }
            if (!is_subtask_id(s.id)) r.problems.push_back("subtask id '" + s.id + "' must be alphanumeric/underscore");
            if (util::trim(s.guideline_excerpt).empty()) {
              r.problems.push_back("subtask '" + s.id + "' has an empty \"guideline_excerpt\"");
            }
            PromptSpec p;
            p.subtask_id = s.id;
            p.instructions = std::string(util::trim(body));
            p.system_prompt = compose_system_prompt(body, task.task_description(), s, prefs.output_format_notes);
            plan.prompts.push_back(std::move(p));
            plan.subtasks.push_back(std::move(s));
          } catch (const Error& e) {
            r.fail_structural(e.what());
          }
        }
      }
      auto logic = j->find("logic");
      if (logic == j->end() || !logic->is_string()) {
        r.fail_structural("\"logic\" must be a string holding the rule program");
      } else {
        plan.logic_source = logic->get<std::string>();
      }
    }
    if (!r.structural) {
      auto n = static_cast<int>(plan.subtasks.size());
      if (n < 1 || n > prefs.max_subtasks) {
        r.problems.push_back("expected between 1 and " + std::to_string(prefs.max_subtasks) + " subtasks, got " +
                             std::to_string(n));
      }
      for (auto& v : validate_plan(plan)) r.problems.push_back(v);
    }
    if (r.problems.empty()) {
      std::vector<FeatureSchema> schemas;
      for (auto& s : plan.subtasks) schemas.push_back(s.output_schema);
      plan.logic = dsl::parse_logic(plan.logic_source, schemas, labels);
      plan.provenance.planner_model =
          cloud_.profile().model.empty() ? std::string(llm::to_string(cloud_.profile().kind)) : cloud_.profile().model;
      plan.provenance.created_at = options_.deterministic ? std::string(util::kEpochTimestamp) : util::utc_now();
      plan.provenance.template_digests = templates_.digests();
      return plan;
    }
    last = r;
    user = render(templates_.get("repair"),
                  {{"original", original}, {"problems", bullet_list(r.problems)}, {"previous_reply", reply}});
  }
  throw Error(last.structural ? ErrorCode::malformed_plan : ErrorCode::budget_exceeded,
              "decomposition still invalid after " + std::to_string(options_.max_repairs) +
                  " repair round-trips: " + util::join(last.problems, "; "));
}

SyntheticBatch Planner::generate_synthetic(const Subtask& subtask, std::string_view guideline, int count) const {
  if (count < 1) throw Error(ErrorCode::invalid_argument, "count: must be positive");
  const FeatureSchema& schema = subtask.output_schema;

  SyntheticBatch batch;
  std::size_t widest = 0;
  for (auto& f : schema.fields()) {
    if (f.kind == FieldKind::categorical) widest = std::max(widest, f.allowed.size());
  }
  batch.coverage_unreachable = widest > static_cast<std::size_t>(count);
  if (batch.coverage_unreachable) {
    batch.warnings.push_back("coverage_unreachable: subtask '" + subtask.id + "' has a field with " +
                             std::to_string(widest) + " values but only " + std::to_string(count) + " cases");
  }
  const std::string coverage =
      batch.coverage_unreachable
          ? "Cover as many distinct values of each categorical field as the case count allows."
          : "Across the cases, every listed value of every categorical field must appear as an expected value at "
            "least once.";

  const std::string original = render(templates_.get("synthetic"), {{"count", std::to_string(count)},
                                                                    {"subtask_id", subtask.id},
                                                                    {"subtask_name", subtask.name},
                                                                    {"subtask_description", subtask.description},
                                                                    {"schema", describe_schema(schema)},
                                                                    {"guideline", std::string(guideline)},
                                                                    {"coverage", coverage}});
  std::string user = original;
  std::vector<std::string> last_problems;
  std::optional<std::vector<SyntheticCase>> best;

  for (int attempt = 0; attempt <= options_.max_repairs; ++attempt) {
    batch.repairs = attempt;
    const std::string reply = cloud_.complete(cloud_.request(templates_.get("planner_system"), user)).raw_text;
    Rejection r;
    std::vector<SyntheticCase> cases;
    if (auto j = reply_object(reply, r)) {
      auto arr = j->find("cases");
      if (arr == j->end() || !arr->is_array()) {
        r.fail_structural("\"cases\" must be an array");
      } else {
        int index = 0;
        for (auto& jc : *arr) {
          ++index;
          if (!jc.is_object() || !jc.contains("input") || !jc["input"].is_string() || !jc.contains("expected")) {
            r.fail_structural("case " + std::to_string(index) + " needs string \"input\" and object \"expected\"");
            continue;
          }
          SyntheticCase c;
          char id[16];
          std::snprintf(id, sizeof(id), "%02d", index);
          c.id = subtask.id + "-" + id;
          c.subtask_id = subtask.id;
          c.input_text = jc["input"].get<std::string>();
          if (util::trim(c.input_text).empty()) {
            r.problems.push_back("case " + std::to_string(index) + " has an empty input");
            continue;
          }
          try {
            c.expected = FeatureSet::conforming(schema, json_io::feature_map_from_json(jc["expected"]));
          } catch (const Error& e) {
            r.problems.push_back("case " + std::to_string(index) + ": " + e.what());
            continue;
          }
          cases.push_back(std::move(c));
        }
      }
    }
    if (!r.structural && r.problems.empty() && static_cast<int>(cases.size()) < count) {
      r.problems.push_back("expected " + std::to_string(count) + " cases, got " + std::to_string(cases.size()));
    }
    if (r.problems.empty()) {
      cases.resize(static_cast<std::size_t>(count));
      std::vector<std::string> missing;
      if (!batch.coverage_unreachable) {
        for (auto& f : schema.fields()) {
          if (f.kind != FieldKind::categorical) continue;
          for (auto& v : f.allowed) {
            bool seen = std::any_of(cases.begin(), cases.end(), [&](auto& c) { return c.expected.get(f.name) == v; });
            if (!seen) missing.push_back(f.name + "=" + v);
          }
        }
      }
      if (missing.empty() || attempt == options_.max_repairs) {
        if (!missing.empty()) {
          batch.warnings.push_back("coverage: subtask '" + subtask.id + "' never expects " + util::join(missing, ", "));
        }
        batch.cases = std::move(cases);
        return batch;
      }
      best = std::move(cases);
      r.problems.push_back("these categorical values never appear as expected values: " + util::join(missing, ", "));
    } else if (best && attempt == options_.max_repairs) {
      // an earlier reply was well-formed and only missed coverage
      batch.warnings.push_back("coverage: subtask '" + subtask.id + "' falls back to an earlier reply");
      batch.cases = std::move(*best);
      return batch;
    }
    last_problems = r.problems;
    user = render(templates_.get("repair"),
                  {{"original", original}, {"problems", bullet_list(r.problems)}, {"previous_reply", reply}});
  }
  throw Error(ErrorCode::malformed_cases, "synthetic cases for '" + subtask.id + "' still invalid after " +
                                              std::to_string(options_.max_repairs) +
                                              " repair round-trips: " + util::join(last_problems, "; "));
}

std::vector<std::string> Planner::attach_synthetic(Plan& plan, std::string_view guideline) const {
  std::vector<SyntheticBatch> batches(plan.subtasks.size());
  const int count = plan.task.prefs.synthetic_cases_per_subtask;
  util::parallel_for(plan.subtasks.size(), options_.workers, [&](std::size_t i) {
    batches[i] = generate_synthetic(plan.subtasks[i], guideline, count);
  });
  std::vector<std::string> warnings;
  for (std::size_t i = 0; i < batches.size(); ++i) {
    plan.synthetic_sets[plan.subtasks[i].id] = std::move(batches[i].cases);
    for (auto& w : batches[i].warnings) warnings.push_back(std::move(w));
  }
  return warnings;
}

PromptSpec Planner::refine_prompt(const TaskSummary& task, const Subtask& subtask, const PromptSpec& prompt,
                                  std::span<const FailureCase> failures) const {
  if (failures.empty()) throw Error(ErrorCode::invalid_argument, "failures: refinement needs at least one failing case");
  if (prompt.subtask_id != subtask.id) {
    throw Error(ErrorCode::invalid_argument, "prompt: belongs to '" + prompt.subtask_id + "', not '" + subtask.id + "'");
  }

  std::string block;
  for (auto& f : failures) {
    block += "### Case " + f.expected.id + "\nInput:\n" + f.expected.input_text + "\n";
    block += "Expected output: " + json_io::to_json(f.expected.expected).dump() + "\n";
    block += "Actual output: " + json_io::to_json(f.actual.output).dump() + "\n";
    block += "Parse status: " + std::string(to_string(f.actual.parse_status)) + "\n";
    if (!f.actual.error.empty()) block += "Error: " + f.actual.error + "\n";
    block += "Reasoning trace:\n" + (f.actual.reasoning.empty() ? std::string("(none)") : f.actual.reasoning) + "\n\n";
  }

  const std::string original = render(templates_.get("refine"), {{"subtask_id", subtask.id},
                                                                 {"subtask_name", subtask.name},
                                                                 {"subtask_description", subtask.description},
                                                                 {"revision", std::to_string(prompt.revision)},
                                                                 {"current_instructions", prompt.instructions},
                                                                 {"schema", describe_schema(subtask.output_schema)},
                                                                 {"failures", block}});
  std::string user = original;
  std::vector<std::string> last_problems;
  for (int attempt = 0; attempt <= options_.max_repairs; ++attempt) {
    const std::string reply = cloud_.complete(cloud_.request(templates_.get("planner_system"), user)).raw_text;
    Rejection r;
    if (auto j = reply_object(reply, r)) {
      std::string body(util::trim(instructions_of(*j)));
      if (body.empty()) {
        r.fail_structural("the reply needs a non-empty \"instructions\" string");
      } else if (body == util::trim(prompt.instructions)) {
        r.problems.push_back("the revised instructions are identical to the current ones");
      } else {
        PromptSpec next;
        next.subtask_id = subtask.id;
        next.instructions = body;
        next.system_prompt = compose_system_prompt(body, task.description, subtask, task.prefs.output_format_notes);
        next.revision = prompt.revision + 1;
        next.status = PromptStatus::draft;
        return next;
      }
    }
    last_problems = r.problems;
    user = render(templates_.get("repair"),
                  {{"original", original}, {"problems", bullet_list(r.problems)}, {"previous_reply", reply}});
  }
  throw Error(ErrorCode::malformed_plan, "refinement reply for '" + subtask.id + "' unusable after " +
                                             std::to_string(options_.max_repairs) +
                                             " repair round-trips: " + util::join(last_problems, "; "));
}

}  // namespace orch::planner
