#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <memory>
#include <random>
#include <string>

#include "orch/core/plan.hpp"
#include "orch/core/serialize.hpp"
#include "orch/llm/gateway.hpp"
#include "orch/llm/scripted.hpp"
#include "orch/util/sha256.hpp"

namespace orch::test {

inline std::filesystem::path fixtures() { return ORCH_FIXTURES_DIR; }
inline std::filesystem::path source_dir() { return ORCH_SOURCE_DIR; }

class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("orch-test-" + std::to_string(rd()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  [[nodiscard]] const std::filesystem::path& path() const noexcept { return path_; }
  [[nodiscard]] std::string operator/(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

inline llm::GatewayOptions fast_options() {
  llm::GatewayOptions o;
  o.retry.sleep = [](std::chrono::milliseconds) {};
  return o;
}

inline std::unique_ptr<llm::Gateway> gateway(llm::Phase phase, std::shared_ptr<llm::Backend> backend,
                                             llm::GatewayOptions options = fast_options()) {
  llm::BackendProfile profile =
      phase == llm::Phase::planning ? llm::BackendProfile::cloud_defaults() : llm::BackendProfile::local_defaults();
  profile.kind = llm::BackendKind::scripted;
  return std::make_unique<llm::Gateway>(phase, profile, std::move(backend), std::move(options));
}

inline std::shared_ptr<llm::ScriptedBackend> responder(llm::ScriptedBackend::Responder fn) {
  return std::make_shared<llm::ScriptedBackend>(std::move(fn));
}

inline std::string reply(const std::string& field, const std::string& value, const std::string& why = "because") {
  return nlohmann::json{{"reasoning", why}, {"output", {{field, value}}}}.dump();
}

inline FeatureSet features(FeatureSet::Map m) { return FeatureSet(std::move(m)); }

inline FeatureSchema categorical(const std::string& name, std::vector<std::string> values) {
  return FeatureSchema({FieldSpec{name, FieldKind::categorical, std::move(values)}});
}

/// Two subtasks with refined prompts, synthetic cases and first-match logic.
inline Plan sample_plan() {
  Plan p;
  p.task.description = "Grade lesions from a report.";
  p.task.prefs.output_labels = {"Low", "Mid", "High"};
  p.task.prefs.synthetic_cases_per_subtask = 2;
  p.task.guideline_sha256 = util::sha256_hex("guideline text");
  p.subtasks = {
      Subtask{"size", "Lesion size", "Size band", "Large is over 2 cm.", categorical("size_band", {"small", "large"})},
      Subtask{"spread", "Spread", "Local spread", "Spread means invasion.", categorical("spread", {"none", "local"})},
  };
  for (auto& s : p.subtasks) {
    PromptSpec ps;
    ps.subtask_id = s.id;
    ps.instructions = "Extract " + s.name + ".";
    ps.system_prompt = ps.instructions + "\nSubtask id: " + s.id + "\n";
    ps.revision = 1;
    ps.status = PromptStatus::refined;
    ps.validation = ValidationSummary{2, 2, Threshold{}, 1};
    p.prompts.push_back(ps);
  }
  p.synthetic_sets["size"] = {
      SyntheticCase{"size-01", "size", "A 3 cm lesion.", features({{"size_band", "large"}})},
      SyntheticCase{"size-02", "size", "A 1 cm lesion.", features({{"size_band", "small"}})},
  };
  p.synthetic_sets["spread"] = {
      SyntheticCase{"spread-01", "spread", "Invades fat.", features({{"spread", "local"}})},
      SyntheticCase{"spread-02", "spread", "Confined.", features({{"spread", "none"}})},
  };
  p.logic_source = "when spread == local -> High\nwhen size_band == large -> Mid\ndefault -> Low\n";
  p.logic = dsl::parse_logic(p.logic_source, std::vector<FeatureSchema>{p.subtasks[0].output_schema, p.subtasks[1].output_schema},
                             p.labels());
  p.provenance.planner_model = "scripted";
  p.provenance.created_at = "1970-01-01T00:00:00Z";
  return p;
}

}  // namespace orch::test
