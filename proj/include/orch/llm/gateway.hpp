#pragma once

#include <atomic>
#include <functional>
#include <memory>
#include <mutex>
#include <random>
#include <semaphore>

#include "orch/llm/types.hpp"

namespace orch::llm {

/// Which side of the air gap a gateway serves. Planning gateways refuse
/// local_http profiles; execution gateways refuse cloud_http profiles.
enum class Phase { planning, execution };

std::string_view to_string(Phase p) noexcept;

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds base_delay{250};
  double multiplier = 2.0;
  double jitter = 0.2;  // fraction of the delay added uniformly at random
  std::function<void(std::chrono::milliseconds)> sleep;  // defaults to this_thread::sleep_for

  /// Delay before retry number `retry` (1-based), without jitter.
  [[nodiscard]] std::chrono::milliseconds backoff(int retry) const;
};

using TokenEstimator = std::function<std::size_t(std::string_view)>;

/// Default estimate: one token per four characters, rounded up.
std::size_t estimate_tokens(std::string_view text) noexcept;

struct GatewayOptions {
  RetryPolicy retry;
  std::size_t max_in_flight = 4;
  TokenEstimator estimator = estimate_tokens;
};

class Gateway {
 public:
  Gateway(Phase phase, BackendProfile profile, std::shared_ptr<Backend> backend, GatewayOptions options = {});

  Gateway(const Gateway&) = delete;
  Gateway& operator=(const Gateway&) = delete;

  /// Context check, bounded concurrency, and retries with exponential
  /// backoff on transport faults. Throws transport, truncated or
  /// backend_refusal.
  ChatResponse complete(const ChatRequest& request) const;

  /// Request pre-filled with the profile's temperature and context size.
  [[nodiscard]] ChatRequest request(std::string system_prompt, std::string user_content) const;

  [[nodiscard]] Phase phase() const noexcept { return phase_; }
  [[nodiscard]] const BackendProfile& profile() const noexcept { return profile_; }
  [[nodiscard]] std::size_t retry_count() const noexcept { return retries_.load(); }
  [[nodiscard]] std::size_t request_count() const noexcept { return requests_.load(); }

 private:
  Phase phase_;
  BackendProfile profile_;
  std::shared_ptr<Backend> backend_;
  GatewayOptions options_;
  std::unique_ptr<std::counting_semaphore<>> slots_;
  mutable std::atomic<std::size_t> retries_{0};
  mutable std::atomic<std::size_t> requests_{0};
  mutable std::mutex rng_mutex_;
  mutable std::mt19937_64 rng_{0x5eed};
};

/// Throws phase_violation when the profile kind is not allowed in `phase`.
void check_phase(Phase phase, BackendKind kind);

/// Backend named by the profile: HTTP adapter, scripted file, or a
/// record/replay wrapper when session_mode is set.
std::shared_ptr<Backend> make_backend(const BackendProfile& profile);

std::unique_ptr<Gateway> open_gateway(Phase phase, const BackendProfile& profile, GatewayOptions options = {});

}  // namespace orch::llm
