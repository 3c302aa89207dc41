#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "orch/bundle/bundle.hpp"
#include "orch/llm/types.hpp"

// Operator configuration: a plain-text file of `key = value` lines ('#'
// starts a comment). Relative paths resolve against the file's directory.
// Secrets never live here; the cloud API key comes from ORCH_CLOUD_API_KEY.
namespace orch::cli {

struct ProfileConfig {
  std::optional<llm::BackendKind> kind;  // unset = channel not configured
  std::string endpoint;
  std::string model;
  std::optional<double> temperature;
  std::optional<std::size_t> context;
  std::string script;
  std::string session;
  llm::SessionMode session_mode = llm::SessionMode::none;
};

struct Config {
  ProfileConfig cloud;
  ProfileConfig local;
  std::optional<int> rounds;
  std::optional<Threshold> threshold;
  std::optional<int> max_iters;
  std::optional<int> validation_repeats;
  int synthetic_cases = 10;
  std::size_t workers = 1;
  std::size_t max_in_flight = 4;
  int max_repairs = 2;
  int retry_attempts = 3;
  int retry_base_delay_ms = 250;
  std::string templates_dir;

  Config() { local.kind = llm::BackendKind::local_http; }

  /// Throws invalid_argument for unknown keys or bad values.
  void set(std::string_view key, std::string_view value, const std::filesystem::path& base = {});
  void load_file(const std::filesystem::path& file);

  [[nodiscard]] bool cloud_configured() const noexcept { return cloud.kind.has_value(); }
  [[nodiscard]] llm::BackendProfile cloud_profile() const;
  /// `runtime` supplies temperature and context when the config does not.
  [[nodiscard]] llm::BackendProfile local_profile(const bundle::RuntimeDefaults* runtime = nullptr) const;
  /// Bundle values overridden by whatever the config sets explicitly.
  [[nodiscard]] bundle::RuntimeDefaults runtime(bundle::RuntimeDefaults base = {}) const;
};

}  // namespace orch::cli
