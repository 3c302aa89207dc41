#pragma once

#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>

#include "orch/llm/types.hpp"

// Record/replay harness. Session files are JSON lines, one
// {"digest", "request", "response"} object per exchange.
namespace orch::llm {

/// Wraps a live profile so every successful exchange is appended to the
/// session file. The kind stays that of the live profile.
BackendProfile record_session(BackendProfile live, const std::filesystem::path& session_path);

/// Scripted profile serving the recorded responses; unseen requests fail.
BackendProfile replay_session(const std::filesystem::path& session_path);

class RecordingBackend : public Backend {
 public:
  RecordingBackend(std::shared_ptr<Backend> inner, std::filesystem::path session_path);
  ChatResponse complete(const ChatRequest& request) override;

 private:
  std::shared_ptr<Backend> inner_;
  std::filesystem::path path_;
  std::mutex mutex_;
};

/// Identical requests are answered in recorded order; once a digest's
/// recordings are used up, further requests with it are unseen.
class ReplayBackend : public Backend {
 public:
  explicit ReplayBackend(const std::filesystem::path& session_path);
  ChatResponse complete(const ChatRequest& request) override;

  /// SHA-256 of the session file bytes.
  [[nodiscard]] const std::string& session_digest() const noexcept { return digest_; }
  [[nodiscard]] std::size_t exchanges() const noexcept { return total_; }

 private:
  std::map<std::string, std::deque<ChatResponse>> pending_;
  std::mutex mutex_;
  std::string digest_;
  std::size_t total_ = 0;
};

}  // namespace orch::llm
