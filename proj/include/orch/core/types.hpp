#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace orch {

/// Sentinel that is legal for every feature field and absorbs absent or
/// unparseable extractions.
inline constexpr std::string_view kUnknown = "unknown";

enum class FieldKind { categorical, boolean, text };

std::string_view to_string(FieldKind kind) noexcept;
FieldKind parse_field_kind(std::string_view s);

struct FieldSpec {
  std::string name;
  FieldKind kind = FieldKind::categorical;
  std::vector<std::string> allowed;  // categorical only; `unknown` is implicit
  bool required = true;
  std::map<std::string, std::string> aliases;  // raw spelling -> allowed value

  bool operator==(const FieldSpec&) const = default;
};

/// Ordered list of typed output fields for one subtask.
class FeatureSchema {
 public:
  FeatureSchema() = default;
  explicit FeatureSchema(std::vector<FieldSpec> fields);

  [[nodiscard]] const std::vector<FieldSpec>& fields() const noexcept { return fields_; }
  [[nodiscard]] const FieldSpec* find(std::string_view name) const noexcept;
  [[nodiscard]] bool empty() const noexcept { return fields_.empty(); }

  bool operator==(const FeatureSchema&) const = default;

 private:
  std::vector<FieldSpec> fields_;
};

/// Union of several schemas. Fields already present are skipped; callers
/// that care about collisions check them separately.
FeatureSchema merge_schemas(const std::vector<FeatureSchema>& schemas);

/// Maps a raw model value onto the field's canonical spelling after trim,
/// case folding and the alias map. Returns nullopt when illegal.
std::optional<std::string> normalize_value(const FieldSpec& field, std::string_view raw);

/// Field name -> canonical value. Missing fields read as `unknown`.
class FeatureSet {
 public:
  using Map = std::map<std::string, std::string, std::less<>>;

  FeatureSet() = default;
  explicit FeatureSet(Map values) : values_(std::move(values)) {}

  /// Normalizes and checks every value against the schema; throws
  /// invalid_argument naming the first offending field.
  static FeatureSet conforming(const FeatureSchema& schema, const Map& raw);
  static FeatureSet all_unknown(const FeatureSchema& schema);

  [[nodiscard]] std::string_view get(std::string_view field) const noexcept;
  [[nodiscard]] bool is_unknown(std::string_view field) const noexcept;
  [[nodiscard]] const Map& values() const noexcept { return values_; }

  void set(std::string field, std::string value) { values_[std::move(field)] = std::move(value); }

  bool operator==(const FeatureSet&) const = default;

 private:
  Map values_;
};

/// Returns one message per conformance violation (empty when conforming).
std::vector<std::string> conformance_errors(const FeatureSchema& schema, const FeatureSet& set);

struct OutcomeLabel {
  std::string name;
  int ordinal = 0;

  bool operator==(const OutcomeLabel&) const = default;
  std::strong_ordering operator<=>(const OutcomeLabel& other) const {
    if (auto c = ordinal <=> other.ordinal; c != 0) return c;
    return name <=> other.name;
  }
};

/// Ordinal label list, ascending severity. The position defines the
/// "higher stage" relation used when breaking vote ties.
class LabelOrder {
 public:
  LabelOrder() = default;
  explicit LabelOrder(std::vector<std::string> names);

  [[nodiscard]] std::optional<OutcomeLabel> find(std::string_view name) const;
  [[nodiscard]] OutcomeLabel at(std::string_view name) const;
  [[nodiscard]] OutcomeLabel at(int ordinal) const;
  [[nodiscard]] const std::vector<std::string>& names() const noexcept { return names_; }
  [[nodiscard]] std::size_t size() const noexcept { return names_.size(); }

  bool operator==(const LabelOrder&) const = default;

 private:
  std::vector<std::string> names_;
};

struct UserPrefs {
  std::vector<std::string> output_labels;
  int max_subtasks = 8;
  int synthetic_cases_per_subtask = 10;
  std::string output_format_notes;
  std::vector<std::string> include_entities;
  std::vector<std::string> exclude_entities;

  /// Throws invalid_argument naming the offending field.
  void check() const;
  [[nodiscard]] LabelOrder labels() const { return LabelOrder(output_labels); }

  bool operator==(const UserPrefs&) const = default;
};

/// Task description, guideline document and user preferences.
class TaskSpec {
 public:
  TaskSpec(std::string task_description, std::string guideline, UserPrefs prefs);

  [[nodiscard]] const std::string& task_description() const noexcept { return task_description_; }
  [[nodiscard]] const std::string& guideline() const noexcept { return guideline_; }
  [[nodiscard]] const UserPrefs& preferences() const noexcept { return prefs_; }

 private:
  std::string task_description_;
  std::string guideline_;
  UserPrefs prefs_;
};

/// Exact rational pass-rate threshold; comparisons never go through floats.
struct Threshold {
  std::int64_t numerator = 4;
  std::int64_t denominator = 5;

  /// Parses a decimal such as "0.80" or "1", or a fraction "4/5"; must lie in (0, 1].
  static Threshold parse(std::string_view decimal);
  [[nodiscard]] bool met_by(std::int64_t passes, std::int64_t total) const noexcept {
    return total > 0 && passes * denominator >= numerator * total;
  }
  [[nodiscard]] double value() const noexcept {
    return static_cast<double>(numerator) / static_cast<double>(denominator);
  }
  [[nodiscard]] std::string to_string() const;

  bool operator==(const Threshold& o) const noexcept {
    return numerator * o.denominator == o.numerator * denominator;
  }
};

enum class ParseStatus { ok, repaired, unparseable };
std::string_view to_string(ParseStatus s) noexcept;
ParseStatus parse_parse_status(std::string_view s);

/// One execution of a subtask prompt over an input: reasoning trace plus
/// structured output.
struct SubtaskRun {
  std::string subtask_id;
  std::string document_id;  // document id, or synthetic case id during validation
  std::string reasoning;
  FeatureSet output;
  ParseStatus parse_status = ParseStatus::ok;
  std::string error;  // transport/parse diagnostics, empty when ok

  bool operator==(const SubtaskRun&) const = default;
};

}  // namespace orch
