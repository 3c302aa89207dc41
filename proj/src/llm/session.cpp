#include "orch/llm/session.hpp"

#include <sstream>

#include "orch/error.hpp"
#include "orch/util/io.hpp"
#include "orch/util/sha256.hpp"
#include "orch/util/text.hpp"

namespace orch::llm {

BackendProfile record_session(BackendProfile live, const std::filesystem::path& session_path) {
  live.session_mode = SessionMode::record;
  live.session_path = session_path.string();
  return live;
}

BackendProfile replay_session(const std::filesystem::path& session_path) {
  if (!std::filesystem::exists(session_path)) {
    throw Error(ErrorCode::io, "session file " + session_path.string() + " does not exist");
  }
  BackendProfile p;
  p.kind = BackendKind::scripted;
  p.session_mode = SessionMode::replay;
  p.session_path = session_path.string();
  return p;
}

RecordingBackend::RecordingBackend(std::shared_ptr<Backend> inner, std::filesystem::path session_path)
    : inner_(std::move(inner)), path_(std::move(session_path)) {
  util::write_file(path_, "");
}

ChatResponse RecordingBackend::complete(const ChatRequest& request) {
  ChatResponse response = inner_->complete(request);
  nlohmann::json line = {{"digest", request_digest(request)}, {"request", to_json(request)}, {"response", to_json(response)}};
  std::lock_guard lock(mutex_);
  util::append_line(path_, line.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace));
  return response;
}

ReplayBackend::ReplayBackend(const std::filesystem::path& session_path) {
  std::string bytes = util::read_file(session_path);
  digest_ = util::sha256_hex(bytes);
  std::istringstream in(bytes);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (util::trim(line).empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      pending_[j.at("digest").get<std::string>()].push_back(response_from_json(j.at("response")));
      ++total_;
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::malformed, session_path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

ChatResponse ReplayBackend::complete(const ChatRequest& request) {
  auto digest = request_digest(request);
  std::lock_guard lock(mutex_);
  auto it = pending_.find(digest);
  if (it == pending_.end() || it->second.empty()) {
    throw Error(ErrorCode::unseen_request, "no recorded response for request " + digest);
  }
  ChatResponse r = std::move(it->second.front());
  it->second.pop_front();
  return r;
}

}  // namespace orch::llm
