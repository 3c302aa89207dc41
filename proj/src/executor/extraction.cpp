#include "orch/executor/extraction.hpp"

#include "orch/core/serialize.hpp"
#include "orch/error.hpp"
#include "orch/planner/planner.hpp"
#include "orch/util/text.hpp"

namespace orch::executor {

namespace {

using json = nlohmann::json;

bool recoverable(ErrorCode code) {
  return code == ErrorCode::transport || code == ErrorCode::truncated || code == ErrorCode::backend_refusal;
}

SubtaskRun unparseable(const Subtask& subtask, std::string_view input_id, std::string reason) {
  SubtaskRun run;
  run.subtask_id = subtask.id;
  run.document_id = std::string(input_id);
  run.output = FeatureSet::all_unknown(subtask.output_schema);
  run.parse_status = ParseStatus::unparseable;
  run.error = std::move(reason);
  return run;
}

}  // namespace

std::optional<ParsedReply> parse_reply(std::string_view reply, const FeatureSchema& schema,
                                       std::vector<std::string>& problems) {
  const std::size_t before = problems.size();
  auto text = util::find_json_object(reply);
  if (!text) {
    problems.push_back("the reply contains no JSON object");
    return std::nullopt;
  }
  json j;
  try {
    j = json::parse(*text);
  } catch (const json::parse_error& e) {
    problems.push_back(std::string("the JSON object does not parse: ") + e.what());
    return std::nullopt;
  }

  ParsedReply out;
  const json* fields = &j;
  if (auto it = j.find("output"); it != j.end()) {
    if (!it->is_object()) {
      problems.push_back("\"output\" must be an object");
      return std::nullopt;
    }
    fields = &*it;
  }
  if (auto it = j.find("reasoning"); it != j.end()) {
    out.reasoning = it->is_string() ? it->get<std::string>() : it->dump();
  }

  FeatureSet::Map raw;
  bool any = false;
  for (auto& f : schema.fields()) {
    auto it = fields->find(f.name);
    if (it == fields->end()) {
      raw.emplace(f.name, std::string(kUnknown));
      continue;
    }
    any = true;
    if (it->is_string()) {
      raw.emplace(f.name, it->get<std::string>());
    } else if (it->is_boolean()) {
      raw.emplace(f.name, it->get<bool>() ? "true" : "false");
    } else if (it->is_null()) {
      raw.emplace(f.name, std::string(kUnknown));
    } else {
      problems.push_back("field '" + f.name + "' must be a string");
    }
  }
  if (!any && !schema.fields().empty()) problems.push_back("none of the declared output fields is present");
  if (problems.size() != before) return std::nullopt;
  try {
    out.output = FeatureSet::conforming(schema, raw);
  } catch (const Error& e) {
    problems.push_back(e.what());
    return std::nullopt;
  }
  return out;
}

std::string format_repair_message(std::string_view input_text, const FeatureSchema& schema,
                                  const std::vector<std::string>& problems, std::string_view previous_reply) {
  std::string out(input_text);
  out += "\n\n## Format repair\nYour previous reply could not be used:\n";
  for (auto& p : problems) out += "- " + p + "\n";
  out += "\nPrevious reply:\n" + std::string(previous_reply) + "\n\n";
  out += planner::format_instructions(schema);
  out += "\nReply with the JSON object only.";
  return out;
}

SubtaskRun extract(const llm::Gateway& gateway, const PromptSpec& prompt, const Subtask& subtask,
                   std::string_view input_id, std::string_view input_text, std::optional<std::uint64_t> seed) {
  const FeatureSchema& schema = subtask.output_schema;
  auto ask = [&](std::string user) {
    llm::ChatRequest req = gateway.request(prompt.system_prompt, std::move(user));
    req.response_schema = json_io::response_schema(schema);
    req.seed = seed;
    return gateway.complete(req).raw_text;
  };

  std::string reply;
  try {
    reply = ask(std::string(input_text));
  } catch (const Error& e) {
    if (!recoverable(e.code())) throw;
    return unparseable(subtask, input_id, e.what());
  }
  std::vector<std::string> problems;
  ParseStatus status = ParseStatus::ok;
  auto parsed = parse_reply(reply, schema, problems);
  if (!parsed) {
    std::string first = util::join(problems, "; ");
    std::string retry;
    try {
      retry = ask(format_repair_message(input_text, schema, problems, reply));
    } catch (const Error& e) {
      if (!recoverable(e.code())) throw;
      return unparseable(subtask, input_id, first + "; repair: " + e.what());
    }
    problems.clear();
    parsed = parse_reply(retry, schema, problems);
    if (!parsed) return unparseable(subtask, input_id, first + "; repair: " + util::join(problems, "; "));
    status = ParseStatus::repaired;
  }

  SubtaskRun run;
  run.subtask_id = subtask.id;
  run.document_id = std::string(input_id);
  run.reasoning = std::move(parsed->reasoning);
  run.output = std::move(parsed->output);
  run.parse_status = status;
  return run;
}

}  // namespace orch::executor
