#include "orch/bundle/bundle.hpp"

#include "orch/core/serialize.hpp"
#include "orch/error.hpp"
#include "orch/util/io.hpp"
#include "orch/util/sha256.hpp"
#include "orch/util/text.hpp"

namespace orch::bundle {

namespace {

using json = nlohmann::json;

constexpr std::string_view kTrailer = "#sha256:";
const char* const kSections[] = {"labels",   "logic",          "prompts", "provenance",
                                 "runtime",  "subtasks",       "synthetic_sets", "task"};

[[noreturn]] void malformed(const std::string& what) { throw Error(ErrorCode::malformed, "bundle: " + what); }

std::string section_hash(const json& section) { return util::sha256_hex(section.dump()); }

int major_of(std::string_view version) {
  auto dot = version.find('.');
  auto head = version.substr(0, dot);
  if (head.empty() || head.size() > 6) malformed("format_version '" + std::string(version) + "' is not semantic");
  int v = 0;
  for (char c : head) {
    if (c < '0' || c > '9') malformed("format_version '" + std::string(version) + "' is not semantic");
    v = v * 10 + (c - '0');
  }
  return v;
}

json runtime_json(const RuntimeDefaults& r) {
  return {{"rounds", r.rounds},
          {"local_temperature", r.local_temperature},
          {"local_context", r.local_context},
          {"threshold", r.threshold.to_string()},
          {"max_iters", r.max_iters},
          {"validation_repeats", r.validation_repeats}};
}

RuntimeDefaults runtime_from(const json& j) {
  try {
    RuntimeDefaults r;
    r.rounds = j.at("rounds").get<int>();
    r.local_temperature = j.at("local_temperature").get<double>();
    r.local_context = j.at("local_context").get<int>();
    r.threshold = Threshold::parse(j.at("threshold").get<std::string>());
    r.max_iters = j.at("max_iters").get<int>();
    r.validation_repeats = j.at("validation_repeats").get<int>();
    r.check();
    return r;
  } catch (const json::exception& e) {
    malformed(std::string("runtime: ") + e.what());
  } catch (const Error& e) {
    malformed(std::string("runtime: ") + e.what());
  }
}

}  // namespace

void RuntimeDefaults::check() const {
  if (rounds < 1) throw Error(ErrorCode::invalid_argument, "rounds: must be at least 1");
  if (local_temperature < 0) throw Error(ErrorCode::invalid_argument, "local_temperature: must be non-negative");
  if (local_context < 1) throw Error(ErrorCode::invalid_argument, "local_context: must be positive");
  if (max_iters < 1) throw Error(ErrorCode::invalid_argument, "max_iters: must be at least 1");
  if (validation_repeats < 1) throw Error(ErrorCode::invalid_argument, "validation_repeats: must be at least 1");
  if (threshold.numerator <= 0 || threshold.numerator > threshold.denominator) {
    throw Error(ErrorCode::invalid_argument, "threshold: must lie in (0, 1]");
  }
}

std::string task_digest(const TaskSummary& task, const std::optional<std::string>& guideline_text) {
  json j = {{"description", task.description},
            {"preferences", json_io::to_json(task.prefs)},
            {"guideline_sha256", task.guideline_sha256}};
  if (guideline_text) j["guideline"] = *guideline_text;
  return util::sha256_hex(j.dump());
}

std::string pack(const Plan& plan, const RuntimeDefaults& runtime, const PackOptions& options) {
  if (auto violations = validate_plan(plan, {.min_cases_per_subtask = 1}); !violations.empty()) {
    throw Error(ErrorCode::plan_invalid, util::join(violations, "; "));
  }
  try {
    runtime.check();
  } catch (const Error& e) {
    throw Error(ErrorCode::plan_invalid, std::string("runtime defaults: ") + e.what());
  }
  for (auto& p : plan.prompts) {
    bool ok = p.status == PromptStatus::refined || (p.status == PromptStatus::failed && options.allow_failed);
    if (!ok) {
      throw Error(ErrorCode::unrefined_prompts,
                  "prompt for '" + p.subtask_id + "' is " + std::string(to_string(p.status)) +
                      (p.status == PromptStatus::failed ? " (pass --allow-failed to include it)" : ""));
    }
  }
  if (options.guideline_text && util::sha256_hex(*options.guideline_text) != plan.task.guideline_sha256) {
    throw Error(ErrorCode::plan_invalid, "guideline text does not match the plan's guideline digest");
  }

  json whole = json_io::to_json(plan);
  json sections;
  sections["task"] = whole["task"];
  sections["task"]["task_digest"] = task_digest(plan.task, options.guideline_text);
  if (options.guideline_text) sections["task"]["guideline"] = *options.guideline_text;
  sections["subtasks"] = whole["subtasks"];
  sections["prompts"] = whole["prompts"];
  sections["logic"] = {{"source", plan.logic_source}, {"digest", dsl::logic_digest(plan.logic)}};
  sections["labels"] = plan.task.prefs.output_labels;
  sections["synthetic_sets"] = whole["synthetic_sets"];
  sections["provenance"] = whole["provenance"];
  sections["runtime"] = runtime_json(runtime);

  json hashes = json::object();
  for (auto* name : kSections) hashes[name] = section_hash(sections[name]);

  json doc = {{"format_version", kFormatVersion},
              {"created_at", options.created_at.empty() ? util::utc_now() : options.created_at},
              {"allow_failed", options.allow_failed},
              {"sections", std::move(sections)},
              {"integrity", {{"sections", std::move(hashes)}}}};
  std::string body = json_io::canonical_dump(doc);
  return body + std::string(kTrailer) + util::sha256_hex(body) + "\n";
}

ArtifactBundle unpack(std::string_view bytes) {
  if (bytes.empty() || bytes.back() != '\n') malformed("file must end with a newline");
  auto cut = bytes.rfind('\n', bytes.size() - 2);
  if (cut == std::string_view::npos) malformed("missing hash trailer");
  std::string_view body = bytes.substr(0, cut + 1);
  std::string_view trailer = bytes.substr(cut + 1, bytes.size() - cut - 2);
  if (!trailer.starts_with(kTrailer)) malformed("missing hash trailer");
  std::string_view hex = trailer.substr(kTrailer.size());
  if (!util::is_sha256_hex(hex)) malformed("trailer is not a lowercase SHA-256 hex digest");

  ArtifactBundle out;
  out.file_sha256 = util::sha256_hex(body);
  if (out.file_sha256 != hex) throw Error(ErrorCode::checksum_mismatch, "bundle: whole-file hash does not match");

  json doc;
  try {
    doc = json::parse(body);
  } catch (const json::parse_error& e) {
    malformed(std::string("JSON does not parse: ") + e.what());
  }
  if (!doc.is_object()) malformed("top level must be an object");
  auto version = doc.find("format_version");
  if (version == doc.end() || !version->is_string()) malformed("format_version missing");
  out.format_version = version->get<std::string>();
  if (major_of(out.format_version) != major_of(kFormatVersion)) {
    throw Error(ErrorCode::version_incompatible, "bundle: format " + out.format_version + " cannot be read by a " +
                                                     std::string(kFormatVersion) + " reader");
  }
  if (json_io::canonical_dump(doc) != body) malformed("body is not in canonical form");

  auto sections = doc.find("sections");
  auto integrity = doc.find("integrity");
  if (sections == doc.end() || !sections->is_object()) malformed("sections missing");
  if (integrity == doc.end() || !integrity->is_object() || !integrity->contains("sections") ||
      !(*integrity)["sections"].is_object()) {
    malformed("integrity.sections missing");
  }
  const json& hashes = (*integrity)["sections"];
  for (auto* name : kSections) {
    if (!sections->contains(name)) malformed(std::string("section '") + name + "' missing");
    auto h = hashes.find(name);
    if (h == hashes.end() || !h->is_string()) malformed(std::string("no hash for section '") + name + "'");
    auto actual = section_hash((*sections)[name]);
    if (actual != h->get<std::string>()) {
      throw Error(ErrorCode::checksum_mismatch, std::string("bundle: section '") + name + "' hash does not match");
    }
    out.section_sha256[name] = actual;
  }
  for (auto& [name, _] : sections->items()) {
    if (!out.section_sha256.contains(name)) malformed("unexpected section '" + name + "'");
  }

  try {
    out.created_at = doc.at("created_at").get<std::string>();
    out.allow_failed = doc.at("allow_failed").get<bool>();
    json task = (*sections)["task"];
    out.task_digest = task.at("task_digest").get<std::string>();
    if (auto g = task.find("guideline"); g != task.end()) out.guideline_text = g->get<std::string>();
    task.erase("task_digest");
    task.erase("guideline");
    const json& logic = (*sections)["logic"];
    json whole = {{"task", task},
                  {"subtasks", (*sections)["subtasks"]},
                  {"prompts", (*sections)["prompts"]},
                  {"logic_source", logic.at("source")},
                  {"synthetic_sets", (*sections)["synthetic_sets"]},
                  {"provenance", (*sections)["provenance"]}};
    out.plan = json_io::plan_from_json(whole);
    if (dsl::logic_digest(out.plan.logic) != logic.at("digest").get<std::string>()) {
      malformed("logic digest does not match its source");
    }
    if ((*sections)["labels"] != json(out.plan.task.prefs.output_labels)) {
      malformed("label ordering disagrees with the task preferences");
    }
  } catch (const json::exception& e) {
    malformed(e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::malformed) throw;
    malformed(e.what());
  }
  out.runtime = runtime_from((*sections)["runtime"]);
  if (out.task_digest != task_digest(out.plan.task, out.guideline_text)) malformed("task digest does not match");
  if (auto v = validate_plan(out.plan); !v.empty()) malformed(util::join(v, "; "));
  for (auto& p : out.plan.prompts) {
    if (p.status == PromptStatus::draft || (p.status == PromptStatus::failed && !out.allow_failed)) {
      malformed("prompt for '" + p.subtask_id + "' is " + std::string(to_string(p.status)));
    }
  }
  return out;
}

}  // namespace orch::bundle
