#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include <json.hpp>

namespace orch::llm {

struct ChatRequest {
  std::string system_prompt;
  std::string user_content;
  double temperature = 0.2;
  std::size_t max_context_tokens = 32768;
  /// JSON-Schema constraint forwarded to backends with constrained decoding.
  std::optional<nlohmann::json> response_schema;
  /// Sampling seed; the executor sets one per inference round.
  std::optional<std::uint64_t> seed;

  /// Throws invalid_argument: temperature in [0, 2], non-empty user content.
  void check() const;

  bool operator==(const ChatRequest&) const = default;
};

enum class FinishReason { complete, truncated, error };

std::string_view to_string(FinishReason r) noexcept;
FinishReason parse_finish_reason(std::string_view s);

struct ChatResponse {
  std::string raw_text;
  FinishReason finish_reason = FinishReason::complete;
  std::chrono::milliseconds latency{0};

  bool operator==(const ChatResponse&) const = default;
};

enum class BackendKind { cloud_http, local_http, scripted };

std::string_view to_string(BackendKind k) noexcept;
BackendKind parse_backend_kind(std::string_view s);

enum class SessionMode { none, record, replay };

struct BackendProfile {
  BackendKind kind = BackendKind::scripted;
  std::string endpoint;
  std::string model;
  double default_temperature = 0.2;
  std::size_t default_context = 32768;
  std::string script_path;   // scripted kind
  std::string session_path;  // record/replay
  SessionMode session_mode = SessionMode::none;

  /// Planner channel defaults: temperature 0.8.
  static BackendProfile cloud_defaults();
  /// Executor channel defaults: temperature 0.2, context 32768 tokens.
  static BackendProfile local_defaults();
};

/// Content digest keying recorded sessions and scripted rules.
std::string request_digest(const ChatRequest& request);

nlohmann::json to_json(const ChatRequest& request);
nlohmann::json to_json(const ChatResponse& response);
ChatResponse response_from_json(const nlohmann::json& j);

/// Transport seam. Implementations throw Error(transport) for retryable
/// faults; the gateway owns retries, context checks and phase policy.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual ChatResponse complete(const ChatRequest& request) = 0;
};

}  // namespace orch::llm
