#include "orch/llm/types.hpp"

#include "orch/error.hpp"
#include "orch/util/sha256.hpp"
#include "orch/util/text.hpp"

namespace orch::llm {

void ChatRequest::check() const {
  if (!(temperature >= 0.0 && temperature <= 2.0)) {
    throw Error(ErrorCode::invalid_argument, "temperature: must lie in [0, 2]");
  }
  if (util::trim(user_content).empty()) throw Error(ErrorCode::invalid_argument, "user_content: must be non-empty");
  if (max_context_tokens == 0) throw Error(ErrorCode::invalid_argument, "max_context_tokens: must be positive");
}

std::string_view to_string(FinishReason r) noexcept {
  switch (r) {
    case FinishReason::complete: return "complete";
    case FinishReason::truncated: return "truncated";
    case FinishReason::error: return "error";
  }
  return "error";
}

FinishReason parse_finish_reason(std::string_view s) {
  if (s == "complete") return FinishReason::complete;
  if (s == "truncated") return FinishReason::truncated;
  if (s == "error") return FinishReason::error;
  throw Error(ErrorCode::malformed, "finish_reason: '" + std::string(s) + "'");
}

std::string_view to_string(BackendKind k) noexcept {
  switch (k) {
    case BackendKind::cloud_http: return "cloud_http";
    case BackendKind::local_http: return "local_http";
    case BackendKind::scripted: return "scripted";
  }
  return "scripted";
}

BackendKind parse_backend_kind(std::string_view s) {
  if (s == "cloud_http") return BackendKind::cloud_http;
  if (s == "local_http") return BackendKind::local_http;
  if (s == "scripted") return BackendKind::scripted;
  throw Error(ErrorCode::invalid_argument, "kind: unsupported backend kind '" + std::string(s) + "'");
}

BackendProfile BackendProfile::cloud_defaults() {
  BackendProfile p;
  p.kind = BackendKind::cloud_http;
  p.default_temperature = 0.8;
  p.default_context = 1'048'576;
  return p;
}

BackendProfile BackendProfile::local_defaults() {
  BackendProfile p;
  p.kind = BackendKind::local_http;
  p.endpoint = "http://127.0.0.1:11434";
  p.default_temperature = 0.2;
  p.default_context = 32768;
  return p;
}

nlohmann::json to_json(const ChatRequest& r) {
  nlohmann::json j = {{"system", r.system_prompt},
                      {"user", r.user_content},
                      {"temperature", r.temperature},
                      {"max_context_tokens", r.max_context_tokens}};
  j["response_schema"] = r.response_schema ? *r.response_schema : nlohmann::json(nullptr);
  j["seed"] = r.seed ? nlohmann::json(*r.seed) : nlohmann::json(nullptr);
  return j;
}

nlohmann::json to_json(const ChatResponse& r) {
  return {{"raw_text", r.raw_text},
          {"finish_reason", std::string(to_string(r.finish_reason))},
          {"latency_ms", r.latency.count()}};
}

ChatResponse response_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("raw_text") || !j["raw_text"].is_string()) {
    throw Error(ErrorCode::malformed, "response: expected object with raw_text");
  }
  ChatResponse r;
  r.raw_text = j["raw_text"].get<std::string>();
  if (j.contains("finish_reason")) r.finish_reason = parse_finish_reason(j["finish_reason"].get<std::string>());
  if (j.contains("latency_ms") && j["latency_ms"].is_number_integer()) {
    r.latency = std::chrono::milliseconds(j["latency_ms"].get<long long>());
  }
  return r;
}

std::string request_digest(const ChatRequest& request) {
  return util::sha256_hex(to_json(request).dump(-1, ' ', false, nlohmann::json::error_handler_t::replace));
}

}  // namespace orch::llm
