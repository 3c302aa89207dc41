#pragma once

#include <string>

#include "orch/llm/types.hpp"

namespace orch::llm {

struct Endpoint {
  std::string scheme_host_port;  // "https://api.example.com:443"
  std::string path_prefix;       // "/v1", may be empty
};

Endpoint parse_endpoint(const std::string& url);

/// OpenAI-compatible chat-completions adapter for the planner channel.
/// The API key comes from ORCH_CLOUD_API_KEY unless provided.
class OpenAICompatibleBackend : public Backend {
 public:
  explicit OpenAICompatibleBackend(BackendProfile profile, std::string api_key = {});
  ChatResponse complete(const ChatRequest& request) override;

  [[nodiscard]] nlohmann::json request_body(const ChatRequest& request) const;

 private:
  BackendProfile profile_;
  Endpoint endpoint_;
  std::string api_key_;
};

/// Ollama /api/chat adapter for the executor channel; num_ctx, temperature
/// and seed travel as options, and the response schema as `format`.
class OllamaBackend : public Backend {
 public:
  explicit OllamaBackend(BackendProfile profile);
  ChatResponse complete(const ChatRequest& request) override;

  [[nodiscard]] nlohmann::json request_body(const ChatRequest& request) const;

 private:
  BackendProfile profile_;
  Endpoint endpoint_;
};

}  // namespace orch::llm
