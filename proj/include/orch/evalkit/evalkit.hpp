#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "orch/core/types.hpp"

// Scoring of final labels against ground truth: accuracy with
// indeterminate exclusion, Cohen's kappa and confusion matrices.
namespace orch::evalkit {

inline constexpr std::string_view kIndeterminate = "indeterminate";

class LabeledSet {
 public:
  explicit LabeledSet(std::string source = {}) : source_(std::move(source)) {}

  /// Throws invalid_argument on a duplicate id.
  void add(std::string id, std::string label);

  [[nodiscard]] const std::string& source() const noexcept { return source_; }
  [[nodiscard]] const std::string* find(std::string_view id) const noexcept;
  [[nodiscard]] const std::vector<std::pair<std::string, std::string>>& entries() const noexcept { return entries_; }
  [[nodiscard]] std::size_t size() const noexcept { return entries_.size(); }

 private:
  std::string source_;
  std::vector<std::pair<std::string, std::string>> entries_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

using Matrix = std::vector<std::vector<std::int64_t>>;

struct Kappa {
  double value = 0.0;
  bool degenerate = false;  // chance agreement is 1; value reported as 1.0
};

/// Rows are ground truth, columns predictions, both in label order.
Kappa kappa_from_matrix(const Matrix& m);

struct EvalReport {
  std::string source;
  std::vector<std::string> labels;
  std::size_t n_total = 0;
  std::size_t n_excluded = 0;
  std::size_t n_scored = 0;
  std::size_t n_correct = 0;
  double accuracy = 0.0;  // fraction
  Kappa kappa;
  Matrix confusion;                    // k x k
  std::vector<std::int64_t> off_label;  // per GT row: predictions outside the label set
  std::vector<std::optional<double>> recall;  // per label; empty row -> nullopt
};

/// Scores `pred` against every determinate id of `gt`. Throws id_mismatch
/// when a scored id has no prediction and invalid_argument when a ground
/// truth label is outside `labels`. Labels are matched case-insensitively.
EvalReport evaluate(const LabeledSet& pred, const LabeledSet& gt, const LabelOrder& labels);

double accuracy(const LabeledSet& pred, const LabeledSet& gt, const LabelOrder& labels);
Kappa cohen_kappa(const LabeledSet& pred, const LabeledSet& gt, const LabelOrder& labels);
Matrix confusion(const LabeledSet& pred, const LabeledSet& gt, const LabelOrder& labels);

/// Ordering for sets that carry no explicit one: GT labels sorted by name.
LabelOrder infer_labels(const LabeledSet& gt);

/// CSV (id,label with optional header) or JSON-lines with id/document_id
/// and label/final_label keys, chosen by extension (.csv vs anything else).
LabeledSet read_labeled(const std::filesystem::path& path, std::string source = {});

nlohmann::json to_json(const EvalReport& r);
std::string format_percent(double fraction);  // "70.21%"
/// Summary rows for several sources followed by each confusion matrix.
std::string render_table(const std::vector<EvalReport>& reports);
std::string confusion_csv(const EvalReport& r);

}  // namespace orch::evalkit
