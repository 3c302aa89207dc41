#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "orch/core/document.hpp"
#include "orch/core/plan.hpp"
#include "orch/executor/vote.hpp"
#include "orch/llm/gateway.hpp"

// Local-phase inference: every prompt over every document, T rounds,
// rule-based synthesis per round, then a majority vote.
namespace orch::executor {

struct RoundRecord {
  int round = 0;
  std::vector<SubtaskRun> runs;  // plan subtask order
  FeatureSet merged;
  OutcomeLabel label;
  std::size_t deciding_rule = 0;  // rules.size() means the default fired
};

struct DocumentPrediction {
  std::string document_id;
  std::vector<RoundRecord> rounds;
  VoteTally vote;

  [[nodiscard]] const OutcomeLabel& final_label() const noexcept { return vote.winner; }
  [[nodiscard]] std::vector<OutcomeLabel> candidates() const;
  [[nodiscard]] bool voted() const noexcept { return rounds.size() > 1; }
};

struct ExecutorOptions {
  int rounds = 5;
  std::size_t workers = 1;           // documents in flight
  std::size_t subtask_workers = 0;   // per round; 0 = one per subtask
  bool allow_failed = false;         // run prompts whose refinement failed
};

class Executor {
 public:
  /// Refuses cloud profiles, non-execution gateways and prompts that are
  /// not refined (failed ones only with allow_failed).
  Executor(const llm::Gateway& local, const Plan& plan, ExecutorOptions options = {});

  [[nodiscard]] SubtaskRun run_subtask(const PromptSpec& prompt, const Document& doc, int round = 0) const;
  [[nodiscard]] DocumentPrediction run_document(const Document& doc) const;

  /// Predictions in input order. `on_done` is called as each document
  /// finishes, serialized.
  std::vector<DocumentPrediction> run_all(const std::vector<Document>& docs,
                                          const std::function<void(const DocumentPrediction&)>& on_done = {}) const;

  [[nodiscard]] const ExecutorOptions& options() const noexcept { return options_; }

 private:
  const llm::Gateway& local_;
  const Plan& plan_;
  ExecutorOptions options_;
};

/// Throws privacy_violation for cloud profiles.
void require_local(const llm::BackendProfile& profile);

/// A directory of UTF-8 .txt files (id = file stem, sorted) or a JSON-lines
/// file of {id, body, format_tag}.
std::vector<Document> load_documents(const std::filesystem::path& path);

nlohmann::json to_json(const DocumentPrediction& p);

struct RunSummary {
  std::size_t documents = 0;
  int rounds = 0;
  std::map<std::string, int> final_labels;
  std::size_t ties = 0;
  std::size_t repaired_runs = 0;
  std::size_t unparseable_runs = 0;
};

RunSummary summarize(const std::vector<DocumentPrediction>& predictions, int rounds);
nlohmann::json to_json(const RunSummary& s);

}  // namespace orch::executor
