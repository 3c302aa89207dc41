#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "orch/core/plan.hpp"

// The .orchb handoff file: canonical JSON followed by a final line
// "#sha256:<hex>" hashing every preceding byte. See docs/bundle-format.md.
namespace orch::bundle {

inline constexpr std::string_view kFormatVersion = "1.0.0";
inline constexpr std::string_view kExtension = ".orchb";

struct RuntimeDefaults {
  int rounds = 5;
  double local_temperature = 0.2;
  int local_context = 32768;
  Threshold threshold;
  int max_iters = 5;
  int validation_repeats = 1;

  void check() const;
  bool operator==(const RuntimeDefaults&) const = default;
};

struct PackOptions {
  bool allow_failed = false;
  /// Embedded verbatim when set; must hash to the plan's guideline digest.
  std::optional<std::string> guideline_text;
  std::string created_at;  // empty = now
};

struct ArtifactBundle {
  std::string format_version;
  std::string created_at;
  bool allow_failed = false;
  std::string task_digest;
  std::optional<std::string> guideline_text;
  RuntimeDefaults runtime;
  Plan plan;
  std::map<std::string, std::string> section_sha256;
  std::string file_sha256;
};

/// Digest of the task description, preferences and guideline digest, plus
/// the guideline body when one is given.
std::string task_digest(const TaskSummary& task, const std::optional<std::string>& guideline_text = std::nullopt);

/// Throws plan_invalid or unrefined_prompts.
std::string pack(const Plan& plan, const RuntimeDefaults& runtime, const PackOptions& options = {});

/// Verifies the trailer, version and section hashes before decoding.
/// Throws checksum_mismatch, version_incompatible or malformed.
ArtifactBundle unpack(std::string_view bytes);

}  // namespace orch::bundle
