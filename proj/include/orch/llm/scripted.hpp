#pragma once

#include <atomic>
#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

#include "orch/llm/types.hpp"

namespace orch::llm {

/// One canned reply. Every condition that is set must hold; the first
/// matching rule wins.
struct ScriptRule {
  std::optional<std::string> digest;
  std::vector<std::string> system_contains;
  std::vector<std::string> user_contains;
  std::vector<std::string> user_excludes;
  std::optional<std::uint64_t> seed;
  std::string response;
  FinishReason finish_reason = FinishReason::complete;
};

/// Deterministic backend for tests and desk-scale runs. Replies are a pure
/// function of the request; `fail_first` injects transport faults ahead of
/// the first successful reply.
class ScriptedBackend : public Backend {
 public:
  using Responder = std::function<std::optional<std::string>(const ChatRequest&)>;

  explicit ScriptedBackend(std::vector<ScriptRule> rules);
  explicit ScriptedBackend(Responder responder);

  /// Script file: {"rules": [...], "fail_first": n}. A rule's "response"
  /// may be a string or any JSON value (serialized compactly).
  static std::shared_ptr<ScriptedBackend> from_file(const std::filesystem::path& path);
  static std::shared_ptr<ScriptedBackend> from_json(const nlohmann::json& script);

  void fail_first(int n) noexcept { pending_failures_ = n; }
  [[nodiscard]] std::size_t calls() const noexcept { return calls_.load(); }

  ChatResponse complete(const ChatRequest& request) override;

 private:
  std::vector<ScriptRule> rules_;
  Responder responder_;
  std::atomic<int> pending_failures_{0};
  std::atomic<std::size_t> calls_{0};
};

}  // namespace orch::llm
