#include "orch/core/serialize.hpp"

#include "orch/error.hpp"

namespace orch::json_io {

namespace {

[[noreturn]] void malformed(const std::string& what) { throw Error(ErrorCode::malformed, what); }

const json& member(const json& j, const char* key, const std::string& ctx) {
  if (!j.is_object()) malformed(ctx + ": expected object");
  auto it = j.find(key);
  if (it == j.end()) malformed(ctx + "." + key + ": missing");
  return *it;
}

std::string str(const json& j, const char* key, const std::string& ctx) {
  const json& v = member(j, key, ctx);
  if (!v.is_string()) malformed(ctx + "." + key + ": expected string");
  return v.get<std::string>();
}

std::string str_or(const json& j, const char* key, std::string fallback) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  if (!it->is_string()) malformed(std::string(key) + ": expected string");
  return it->get<std::string>();
}

int integer(const json& j, const char* key, const std::string& ctx) {
  const json& v = member(j, key, ctx);
  if (!v.is_number_integer()) malformed(ctx + "." + key + ": expected integer");
  return v.get<int>();
}

std::vector<std::string> strings(const json& v, const std::string& ctx) {
  if (!v.is_array()) malformed(ctx + ": expected array");
  std::vector<std::string> out;
  for (auto& e : v) {
    if (!e.is_string()) malformed(ctx + ": expected array of strings");
    out.push_back(e.get<std::string>());
  }
  return out;
}

template <typename Fn>
auto wrap(const std::string& ctx, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::malformed) throw;
    malformed(ctx + ": " + e.what());
  }
}

}  // namespace

json to_json(const FeatureSchema& schema) {
  json fields = json::array();
  for (auto& f : schema.fields()) {
    json jf = {{"name", f.name}, {"kind", std::string(to_string(f.kind))}, {"required", f.required}};
    if (f.kind == FieldKind::categorical) jf["values"] = f.allowed;
    if (!f.aliases.empty()) jf["aliases"] = f.aliases;
    fields.push_back(std::move(jf));
  }
  return json{{"fields", std::move(fields)}};
}

FeatureSchema schema_from_json(const json& j) {
  const json& fields = member(j, "fields", "output_schema");
  if (!fields.is_array() || fields.empty()) malformed("output_schema.fields: expected non-empty array");
  std::vector<FieldSpec> specs;
  for (auto& jf : fields) {
    FieldSpec f;
    f.name = str(jf, "name", "output_schema.fields[]");
    std::string ctx = "output_schema.fields." + f.name;
    f.kind = wrap(ctx, [&] { return parse_field_kind(str_or(jf, "kind", "categorical")); });
    if (auto it = jf.find("values"); it != jf.end() && f.kind == FieldKind::categorical) {
      f.allowed = strings(*it, ctx + ".values");
    }
    if (auto it = jf.find("required"); it != jf.end()) {
      if (!it->is_boolean()) malformed(ctx + ".required: expected boolean");
      f.required = it->get<bool>();
    }
    if (auto it = jf.find("aliases"); it != jf.end()) {
      if (!it->is_object()) malformed(ctx + ".aliases: expected object");
      for (auto& [k, v] : it->items()) {
        if (!v.is_string()) malformed(ctx + ".aliases." + k + ": expected string");
        f.aliases.emplace(k, v.get<std::string>());
      }
    }
    specs.push_back(std::move(f));
  }
  return wrap("output_schema", [&] { return FeatureSchema(std::move(specs)); });
}

json response_schema(const FeatureSchema& schema) {
  json props = json::object();
  json required = json::array();
  for (auto& f : schema.fields()) {
    json v;
    switch (f.kind) {
      case FieldKind::categorical: {
        json values = f.allowed;
        values.push_back(std::string(kUnknown));
        v = {{"type", "string"}, {"enum", values}};
        break;
      }
      case FieldKind::boolean: v = {{"enum", {true, false, std::string(kUnknown)}}}; break;
      case FieldKind::text: v = {{"type", "string"}}; break;
    }
    props[f.name] = std::move(v);
    if (f.required) required.push_back(f.name);
  }
  return json{{"type", "object"},
              {"properties",
               {{"reasoning", {{"type", "string"}}},
                {"output", {{"type", "object"}, {"properties", props}, {"required", required}}}}},
              {"required", {"reasoning", "output"}}};
}

json to_json(const FeatureSet& set) {
  json j = json::object();
  for (auto& [k, v] : set.values()) j[k] = v;
  return j;
}

FeatureSet::Map feature_map_from_json(const json& j) {
  if (!j.is_object()) malformed("features: expected object");
  FeatureSet::Map out;
  for (auto& [k, v] : j.items()) {
    if (v.is_string()) {
      out.emplace(k, v.get<std::string>());
    } else if (v.is_boolean()) {
      out.emplace(k, v.get<bool>() ? "true" : "false");
    } else if (v.is_null()) {
      out.emplace(k, std::string(kUnknown));
    } else {
      malformed("features." + k + ": expected string or boolean");
    }
  }
  return out;
}

json to_json(const UserPrefs& p) {
  return json{{"output_labels", p.output_labels},
              {"max_subtasks", p.max_subtasks},
              {"synthetic_cases_per_subtask", p.synthetic_cases_per_subtask},
              {"output_format_notes", p.output_format_notes},
              {"include_entities", p.include_entities},
              {"exclude_entities", p.exclude_entities}};
}

UserPrefs prefs_from_json(const json& j, const UserPrefs& defaults) {
  UserPrefs p = defaults;
  p.output_labels = strings(member(j, "output_labels", "preferences"), "preferences.output_labels");
  if (j.contains("max_subtasks")) p.max_subtasks = integer(j, "max_subtasks", "preferences");
  if (j.contains("synthetic_cases_per_subtask")) {
    p.synthetic_cases_per_subtask = integer(j, "synthetic_cases_per_subtask", "preferences");
  }
  p.output_format_notes = str_or(j, "output_format_notes", p.output_format_notes);
  if (j.contains("include_entities")) p.include_entities = strings(j["include_entities"], "preferences.include_entities");
  if (j.contains("exclude_entities")) p.exclude_entities = strings(j["exclude_entities"], "preferences.exclude_entities");
  wrap("preferences", [&] {
    p.check();
    return 0;
  });
  return p;
}

json to_json(const Subtask& s) {
  return json{{"id", s.id},
              {"name", s.name},
              {"description", s.description},
              {"guideline_excerpt", s.guideline_excerpt},
              {"output_schema", to_json(s.output_schema)}};
}

Subtask subtask_from_json(const json& j) {
  Subtask s;
  s.id = str(j, "id", "subtask");
  std::string ctx = "subtask." + s.id;
  s.name = str_or(j, "name", s.id);
  s.description = str_or(j, "description", "");
  s.guideline_excerpt = str_or(j, "guideline_excerpt", "");
  s.output_schema = schema_from_json(member(j, "output_schema", ctx));
  return s;
}

json to_json(const PromptSpec& p) {
  json j = {{"subtask_id", p.subtask_id},
            {"instructions", p.instructions},
            {"system_prompt", p.system_prompt},
            {"revision", p.revision},
            {"status", std::string(to_string(p.status))}};
  if (p.validation) {
    j["validation"] = {{"passes", p.validation->passes},
                       {"total", p.validation->total},
                       {"threshold", p.validation->threshold.to_string()},
                       {"revision", p.validation->revision}};
  } else {
    j["validation"] = nullptr;
  }
  return j;
}

PromptSpec prompt_from_json(const json& j) {
  PromptSpec p;
  p.subtask_id = str(j, "subtask_id", "prompt");
  std::string ctx = "prompt." + p.subtask_id;
  p.instructions = str_or(j, "instructions", "");
  p.system_prompt = str(j, "system_prompt", ctx);
  p.revision = integer(j, "revision", ctx);
  p.status = wrap(ctx, [&] { return parse_prompt_status(str(j, "status", ctx)); });
  if (auto it = j.find("validation"); it != j.end() && !it->is_null()) {
    ValidationSummary v;
    v.passes = integer(*it, "passes", ctx + ".validation");
    v.total = integer(*it, "total", ctx + ".validation");
    v.revision = integer(*it, "revision", ctx + ".validation");
    auto t = str(*it, "threshold", ctx + ".validation");
    auto slash = t.find('/');
    if (slash == std::string::npos) malformed(ctx + ".validation.threshold: expected n/d");
    try {
      v.threshold = Threshold{std::stoll(t.substr(0, slash)), std::stoll(t.substr(slash + 1))};
    } catch (const std::exception&) {
      malformed(ctx + ".validation.threshold: expected n/d");
    }
    if (v.threshold.denominator <= 0) malformed(ctx + ".validation.threshold: bad denominator");
    p.validation = v;
  }
  wrap(ctx, [&] {
    p.check();
    return 0;
  });
  return p;
}

json to_json(const SyntheticCase& c) {
  return json{{"id", c.id}, {"subtask_id", c.subtask_id}, {"input", c.input_text}, {"expected", to_json(c.expected)}};
}

SyntheticCase case_from_json(const json& j, const FeatureSchema& schema) {
  SyntheticCase c;
  c.id = str(j, "id", "synthetic_case");
  std::string ctx = "synthetic_case." + c.id;
  c.subtask_id = str(j, "subtask_id", ctx);
  c.input_text = str(j, "input", ctx);
  auto raw = feature_map_from_json(member(j, "expected", ctx));
  c.expected = wrap(ctx, [&] { return FeatureSet::conforming(schema, raw); });
  return c;
}

json to_json(const SubtaskRun& r) {
  return json{{"subtask_id", r.subtask_id},
              {"document_id", r.document_id},
              {"reasoning", r.reasoning},
              {"output", to_json(r.output)},
              {"parse_status", std::string(to_string(r.parse_status))},
              {"error", r.error}};
}

json to_json(const Plan& plan) {
  json subtasks = json::array();
  for (auto& s : plan.subtasks) subtasks.push_back(to_json(s));
  json prompts = json::array();
  for (auto& p : plan.prompts) prompts.push_back(to_json(p));
  json sets = json::object();
  for (auto& [id, cases] : plan.synthetic_sets) {
    json arr = json::array();
    for (auto& c : cases) arr.push_back(to_json(c));
    sets[id] = std::move(arr);
  }
  return json{{"task",
               {{"description", plan.task.description},
                {"preferences", to_json(plan.task.prefs)},
                {"guideline_sha256", plan.task.guideline_sha256}}},
              {"subtasks", std::move(subtasks)},
              {"prompts", std::move(prompts)},
              {"logic_source", plan.logic_source},
              {"synthetic_sets", std::move(sets)},
              {"provenance",
               {{"planner_model", plan.provenance.planner_model},
                {"created_at", plan.provenance.created_at},
                {"template_digests", plan.provenance.template_digests}}}};
}

Plan plan_from_json(const json& j) {
  Plan plan;
  const json& task = member(j, "task", "plan");
  plan.task.description = str(task, "description", "plan.task");
  plan.task.prefs = prefs_from_json(member(task, "preferences", "plan.task"));
  plan.task.guideline_sha256 = str_or(task, "guideline_sha256", "");

  const json& subtasks = member(j, "subtasks", "plan");
  if (!subtasks.is_array()) malformed("plan.subtasks: expected array");
  for (auto& s : subtasks) plan.subtasks.push_back(subtask_from_json(s));

  const json& prompts = member(j, "prompts", "plan");
  if (!prompts.is_array()) malformed("plan.prompts: expected array");
  for (auto& p : prompts) plan.prompts.push_back(prompt_from_json(p));

  plan.logic_source = str(j, "logic_source", "plan");

  if (auto it = j.find("synthetic_sets"); it != j.end()) {
    if (!it->is_object()) malformed("plan.synthetic_sets: expected object");
    for (auto& [id, arr] : it->items()) {
      if (!arr.is_array()) malformed("plan.synthetic_sets." + id + ": expected array");
      const Subtask* owner = plan.find_subtask(id);
      if (!owner) malformed("plan.synthetic_sets." + id + ": unknown subtask");
      auto& cases = plan.synthetic_sets[id];
      for (auto& c : arr) cases.push_back(case_from_json(c, owner->output_schema));
    }
  }

  if (auto it = j.find("provenance"); it != j.end() && it->is_object()) {
    plan.provenance.planner_model = str_or(*it, "planner_model", "");
    plan.provenance.created_at = str_or(*it, "created_at", "");
    if (auto d = it->find("template_digests"); d != it->end() && d->is_object()) {
      for (auto& [k, v] : d->items()) {
        if (v.is_string()) plan.provenance.template_digests.emplace(k, v.get<std::string>());
      }
    }
  }

  try {
    std::vector<FeatureSchema> schemas;
    for (auto& s : plan.subtasks) schemas.push_back(s.output_schema);
    plan.logic = dsl::parse_logic(plan.logic_source, schemas, plan.labels());
  } catch (const Error& e) {
    malformed(std::string("plan.logic_source: ") + e.what());
  }
  return plan;
}

std::string canonical_dump(const json& j) {
  return j.dump(2, ' ', false, json::error_handler_t::strict) + "\n";
}

json parse_json(std::string_view text, std::string_view what) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    malformed(std::string(what) + ": " + e.what());
  }
}

}  // namespace orch::json_io
