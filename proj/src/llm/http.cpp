#include <httplib.h>

#include <cstdlib>

#include "orch/error.hpp"
#include "orch/llm/http.hpp"

namespace orch::llm {

namespace {

using json = nlohmann::json;
using Clock = std::chrono::steady_clock;

json messages(const ChatRequest& r) {
  json m = json::array();
  if (!r.system_prompt.empty()) m.push_back({{"role", "system"}, {"content", r.system_prompt}});
  m.push_back({{"role", "user"}, {"content", r.user_content}});
  return m;
}

httplib::Result post(const Endpoint& ep, const std::string& path, const json& body, const httplib::Headers& headers) {
  httplib::Client client(ep.scheme_host_port);
  client.set_connection_timeout(10, 0);
  client.set_read_timeout(600, 0);
  client.set_write_timeout(60, 0);
  return client.Post(ep.path_prefix + path, headers, body.dump(), "application/json");
}

json parse_body(const httplib::Result& res, const std::string& what) {
  if (!res) throw Error(ErrorCode::transport, what + ": " + httplib::to_string(res.error()));
  if (res->status != 200) {
    // rate limits and server faults are worth retrying; other statuses are not
    bool retryable = res->status == 429 || res->status >= 500;
    throw Error(retryable ? ErrorCode::transport : ErrorCode::backend_refusal,
                what + ": HTTP " + std::to_string(res->status) + " " + res->body.substr(0, 200));
  }
  try {
    return json::parse(res->body);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::transport, what + ": unparseable response body: " + e.what());
  }
}

}  // namespace

Endpoint parse_endpoint(const std::string& url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw Error(ErrorCode::invalid_argument, "endpoint: '" + url + "' lacks a scheme");
  auto path_start = url.find('/', scheme_end + 3);
  Endpoint ep;
  ep.scheme_host_port = url.substr(0, path_start);
  if (path_start != std::string::npos) ep.path_prefix = url.substr(path_start);
  while (!ep.path_prefix.empty() && ep.path_prefix.back() == '/') ep.path_prefix.pop_back();
  return ep;
}

OpenAICompatibleBackend::OpenAICompatibleBackend(BackendProfile profile, std::string api_key)
    : profile_(std::move(profile)), endpoint_(parse_endpoint(profile_.endpoint)), api_key_(std::move(api_key)) {
  if (api_key_.empty()) {
    if (const char* env = std::getenv("ORCH_CLOUD_API_KEY")) api_key_ = env;
  }
}

json OpenAICompatibleBackend::request_body(const ChatRequest& r) const {
  json body = {{"model", profile_.model}, {"messages", messages(r)}, {"temperature", r.temperature}};
  if (r.seed) body["seed"] = *r.seed;
  if (r.response_schema) {
    body["response_format"] = {{"type", "json_schema"},
                               {"json_schema", {{"name", "structured_output"}, {"schema", *r.response_schema}}}};
  }
  return body;
}

ChatResponse OpenAICompatibleBackend::complete(const ChatRequest& r) {
  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
  auto start = Clock::now();
  json body = parse_body(post(endpoint_, "/chat/completions", request_body(r), headers), "chat completions");
  ChatResponse out;
  out.latency = std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - start);
  try {
    const json& choice = body.at("choices").at(0);
    const json& content = choice.at("message").at("content");
    out.raw_text = content.is_string() ? content.get<std::string>() : "";
    std::string reason = choice.value("finish_reason", "stop");
    if (reason == "length") {
      out.finish_reason = FinishReason::truncated;
    } else if (reason == "content_filter") {
      out.finish_reason = FinishReason::error;
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::transport, std::string("chat completions: unexpected response shape: ") + e.what());
  }
  return out;
}

OllamaBackend::OllamaBackend(BackendProfile profile)
    : profile_(std::move(profile)), endpoint_(parse_endpoint(profile_.endpoint)) {}

json OllamaBackend::request_body(const ChatRequest& r) const {
  json options = {{"temperature", r.temperature}, {"num_ctx", r.max_context_tokens}};
  if (r.seed) options["seed"] = *r.seed;
  json body = {{"model", profile_.model}, {"messages", messages(r)}, {"stream", false}, {"options", options}};
  if (r.response_schema) body["format"] = *r.response_schema;
  return body;
}

ChatResponse OllamaBackend::complete(const ChatRequest& r) {
  auto start = Clock::now();
  json body = parse_body(post(endpoint_, "/api/chat", request_body(r), {}), "ollama chat");
  ChatResponse out;
  out.latency = std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - start);
  try {
    out.raw_text = body.at("message").at("content").get<std::string>();
    if (body.value("done_reason", "stop") == "length") out.finish_reason = FinishReason::truncated;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::transport, std::string("ollama chat: unexpected response shape: ") + e.what());
  }
  return out;
}

}  // namespace orch::llm
