#include "orch/llm/gateway.hpp"

#include <cmath>
#include <thread>

#include "orch/error.hpp"
#include "orch/llm/http.hpp"
#include "orch/llm/scripted.hpp"
#include "orch/llm/session.hpp"
#include "orch/util/text.hpp"

namespace orch::llm {

namespace {

class SlotGuard {
 public:
  explicit SlotGuard(std::counting_semaphore<>& s) : s_(s) { s_.acquire(); }
  ~SlotGuard() { s_.release(); }
  SlotGuard(const SlotGuard&) = delete;
  SlotGuard& operator=(const SlotGuard&) = delete;

 private:
  std::counting_semaphore<>& s_;
};

}  // namespace

std::string_view to_string(Phase p) noexcept { return p == Phase::planning ? "planning" : "execution"; }

std::chrono::milliseconds RetryPolicy::backoff(int retry) const {
  double ms = static_cast<double>(base_delay.count()) * std::pow(multiplier, retry - 1);
  return std::chrono::milliseconds(static_cast<long long>(ms));
}

std::size_t estimate_tokens(std::string_view text) noexcept { return (text.size() + 3) / 4; }

void check_phase(Phase phase, BackendKind kind) {
  if (phase == Phase::planning && kind == BackendKind::local_http) {
    throw Error(ErrorCode::phase_violation, "planning phase may not use a local_http profile");
  }
  if (phase == Phase::execution && kind == BackendKind::cloud_http) {
    throw Error(ErrorCode::phase_violation, "execution phase may not use a cloud_http profile");
  }
}

Gateway::Gateway(Phase phase, BackendProfile profile, std::shared_ptr<Backend> backend, GatewayOptions options)
    : phase_(phase), profile_(std::move(profile)), backend_(std::move(backend)), options_(std::move(options)) {
  check_phase(phase_, profile_.kind);
  if (!backend_) throw Error(ErrorCode::invalid_argument, "backend: null");
  if (options_.max_in_flight == 0) throw Error(ErrorCode::invalid_argument, "max_in_flight: must be positive");
  if (options_.retry.max_attempts < 1) throw Error(ErrorCode::invalid_argument, "max_attempts: must be positive");
  if (!options_.estimator) options_.estimator = estimate_tokens;
  slots_ = std::make_unique<std::counting_semaphore<>>(static_cast<std::ptrdiff_t>(options_.max_in_flight));
}

ChatRequest Gateway::request(std::string system_prompt, std::string user_content) const {
  ChatRequest r;
  r.system_prompt = std::move(system_prompt);
  r.user_content = std::move(user_content);
  r.temperature = profile_.default_temperature;
  r.max_context_tokens = profile_.default_context;
  return r;
}

ChatResponse Gateway::complete(const ChatRequest& request) const {
  check_phase(phase_, profile_.kind);
  request.check();
  std::size_t tokens = options_.estimator(request.system_prompt) + options_.estimator(request.user_content);
  if (tokens > request.max_context_tokens) {
    throw Error(ErrorCode::truncated, "request needs ~" + std::to_string(tokens) + " tokens, context is " +
                                          std::to_string(request.max_context_tokens));
  }

  SlotGuard slot(*slots_);
  ++requests_;
  ChatResponse response;
  for (int attempt = 1;; ++attempt) {
    try {
      response = backend_->complete(request);
      break;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::transport) throw;
      if (attempt >= options_.retry.max_attempts) {
        throw Error(ErrorCode::transport,
                    "giving up after " + std::to_string(attempt) + " attempts: " + std::string(e.what()));
      }
    }
    ++retries_;
    auto delay = options_.retry.backoff(attempt);
    if (options_.retry.jitter > 0 && delay.count() > 0) {
      std::lock_guard lock(rng_mutex_);
      std::uniform_real_distribution<double> dist(0.0, options_.retry.jitter);
      delay += std::chrono::milliseconds(static_cast<long long>(dist(rng_) * static_cast<double>(delay.count())));
    }
    if (options_.retry.sleep) {
      options_.retry.sleep(delay);
    } else {
      std::this_thread::sleep_for(delay);
    }
  }

  switch (response.finish_reason) {
    case FinishReason::truncated: throw Error(ErrorCode::truncated, "backend stopped at the context limit");
    case FinishReason::error: throw Error(ErrorCode::backend_refusal, "backend reported an error: " + response.raw_text);
    case FinishReason::complete: break;
  }
  if (util::trim(response.raw_text).empty()) throw Error(ErrorCode::backend_refusal, "empty reply");
  return response;
}

std::shared_ptr<Backend> make_backend(const BackendProfile& profile) {
  std::shared_ptr<Backend> backend;
  if (profile.session_mode == SessionMode::replay) {
    backend = std::make_shared<ReplayBackend>(profile.session_path);
  } else {
    switch (profile.kind) {
      case BackendKind::cloud_http: backend = std::make_shared<OpenAICompatibleBackend>(profile); break;
      case BackendKind::local_http: backend = std::make_shared<OllamaBackend>(profile); break;
      case BackendKind::scripted:
        if (profile.script_path.empty()) throw Error(ErrorCode::invalid_argument, "script: scripted profile needs a script file");
        backend = ScriptedBackend::from_file(profile.script_path);
        break;
    }
  }
  if (profile.session_mode == SessionMode::record) {
    backend = std::make_shared<RecordingBackend>(std::move(backend), profile.session_path);
  }
  return backend;
}

std::unique_ptr<Gateway> open_gateway(Phase phase, const BackendProfile& profile, GatewayOptions options) {
  check_phase(phase, profile.kind);
  return std::make_unique<Gateway>(phase, profile, make_backend(profile), std::move(options));
}

}  // namespace orch::llm
