#include "orch/llm/scripted.hpp"

#include "orch/error.hpp"
#include "orch/util/io.hpp"

namespace orch::llm {

namespace {

std::vector<std::string> one_or_many(const nlohmann::json& rule, const char* key) {
  auto it = rule.find(key);
  if (it == rule.end()) return {};
  if (it->is_string()) return {it->get<std::string>()};
  if (!it->is_array()) throw Error(ErrorCode::malformed, std::string("script rule.") + key + ": expected string or array");
  std::vector<std::string> out;
  for (auto& v : *it) {
    if (!v.is_string()) throw Error(ErrorCode::malformed, std::string("script rule.") + key + ": expected strings");
    out.push_back(v.get<std::string>());
  }
  return out;
}

bool matches(const ScriptRule& rule, const ChatRequest& request) {
  if (rule.digest && *rule.digest != request_digest(request)) return false;
  if (rule.seed && rule.seed != request.seed) return false;
  for (auto& s : rule.system_contains) {
    if (request.system_prompt.find(s) == std::string::npos) return false;
  }
  for (auto& s : rule.user_contains) {
    if (request.user_content.find(s) == std::string::npos) return false;
  }
  for (auto& s : rule.user_excludes) {
    if (request.user_content.find(s) != std::string::npos) return false;
  }
  return true;
}

}  // namespace

ScriptedBackend::ScriptedBackend(std::vector<ScriptRule> rules) : rules_(std::move(rules)) {}

ScriptedBackend::ScriptedBackend(Responder responder) : responder_(std::move(responder)) {}

std::shared_ptr<ScriptedBackend> ScriptedBackend::from_json(const nlohmann::json& script) {
  if (!script.is_object() || !script.contains("rules") || !script["rules"].is_array()) {
    throw Error(ErrorCode::malformed, "script: expected {\"rules\": [...]}");
  }
  std::vector<ScriptRule> rules;
  for (auto& jr : script["rules"]) {
    if (!jr.is_object() || !jr.contains("response")) throw Error(ErrorCode::malformed, "script rule: missing response");
    ScriptRule r;
    if (jr.contains("digest")) r.digest = jr["digest"].get<std::string>();
    if (jr.contains("seed")) r.seed = jr["seed"].get<std::uint64_t>();
    r.system_contains = one_or_many(jr, "system_contains");
    r.user_contains = one_or_many(jr, "user_contains");
    r.user_excludes = one_or_many(jr, "user_excludes");
    const auto& resp = jr["response"];
    r.response = resp.is_string() ? resp.get<std::string>() : resp.dump();
    if (jr.contains("finish_reason")) r.finish_reason = parse_finish_reason(jr["finish_reason"].get<std::string>());
    rules.push_back(std::move(r));
  }
  auto backend = std::make_shared<ScriptedBackend>(std::move(rules));
  if (script.contains("fail_first")) backend->fail_first(script["fail_first"].get<int>());
  return backend;
}

std::shared_ptr<ScriptedBackend> ScriptedBackend::from_file(const std::filesystem::path& path) {
  nlohmann::json script;
  try {
    script = nlohmann::json::parse(util::read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::malformed, "script " + path.string() + ": " + e.what());
  }
  return from_json(script);
}

ChatResponse ScriptedBackend::complete(const ChatRequest& request) {
  ++calls_;
  if (pending_failures_.load() > 0 && pending_failures_.fetch_sub(1) > 0) {
    throw Error(ErrorCode::transport, "scripted transport fault");
  }
  if (responder_) {
    auto text = responder_(request);
    if (!text) throw Error(ErrorCode::backend_refusal, "scripted responder declined the request");
    return ChatResponse{*text, FinishReason::complete, std::chrono::milliseconds(0)};
  }
  for (auto& rule : rules_) {
    if (matches(rule, request)) return ChatResponse{rule.response, rule.finish_reason, std::chrono::milliseconds(0)};
  }
  throw Error(ErrorCode::backend_refusal, "no scripted rule matches request " + request_digest(request));
}

}  // namespace orch::llm
