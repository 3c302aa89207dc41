#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "orch/core/types.hpp"
#include "orch/error.hpp"

// Synthesis-logic language: an ordered list of `when <condition> -> <label>`
// rules closed by a mandatory `default -> <label>`. The first rule whose
// condition holds decides the outcome. See docs/rule-dsl.md for the grammar.
namespace orch::dsl {

struct SourcePos {
  int line = 1;
  int column = 1;
};

struct Expr {
  enum class Kind { equals, not_equals, member_of, is_unknown, all_of, any_of, negate };

  Kind kind = Kind::equals;
  std::string field;                // atoms
  std::vector<std::string> values;  // equals/not_equals: one; member_of: one or more
  std::vector<Expr> operands;       // all_of/any_of: two or more; negate: one
  SourcePos pos;

  /// Structural equality; source positions are ignored.
  bool operator==(const Expr& other) const;
};

struct Rule {
  Expr condition;
  OutcomeLabel label;
  SourcePos pos;

  bool operator==(const Rule& other) const { return condition == other.condition && label == other.label; }
};

struct SynthesisLogic {
  std::vector<Rule> rules;
  OutcomeLabel default_label;

  bool operator==(const SynthesisLogic&) const = default;
};

/// Unchecked syntax tree: labels are still names.
struct ProgramRule {
  Expr condition;
  std::string label;
  SourcePos pos;
  SourcePos label_pos;
};

struct Program {
  std::vector<ProgramRule> rules;
  std::string default_label;  // empty when absent
  SourcePos default_pos;
  SourcePos end_pos;
};

struct Diagnostic {
  ErrorCode code = ErrorCode::syntax_error;
  SourcePos pos;
  std::string subject;  // offending field, value, label or token
  std::string message;
};

std::string format(const Diagnostic& d);

class LogicError : public Error {
 public:
  explicit LogicError(Diagnostic d) : Error(d.code, format(d)), diagnostic_(std::move(d)) {}
  [[nodiscard]] const Diagnostic& diagnostic() const noexcept { return diagnostic_; }

 private:
  Diagnostic diagnostic_;
};

/// Syntax only. Throws LogicError(syntax_error) with line/column.
Program parse_program(std::string_view source);

/// Static checks: field existence, value legality, label legality, default
/// presence. Literal values are rewritten to their canonical spelling.
std::vector<Diagnostic> check_program(Program& program, const FeatureSchema& schema, const LabelOrder& labels);

/// Parse plus static checks; throws the first diagnostic as LogicError.
SynthesisLogic parse_logic(std::string_view source, const FeatureSchema& schema, const LabelOrder& labels);
SynthesisLogic parse_logic(std::string_view source, const std::vector<FeatureSchema>& schemas,
                           const LabelOrder& labels);

/// Atom semantics: `==` and `in` are false on `unknown`; `!=` is true on
/// `unknown`; only `is_unknown` matches it positively.
bool holds(const Expr& condition, const FeatureSet& features);

/// Label of the first rule that holds, else the default. Pure and total.
OutcomeLabel evaluate(const SynthesisLogic& logic, const FeatureSet& features);

/// Index of the first rule that holds, or rules.size() for the default.
std::size_t deciding_rule(const SynthesisLogic& logic, const FeatureSet& features);

/// Canonical source text; re-parses to a structurally equal program.
std::string pretty_print(const SynthesisLogic& logic);
std::string pretty_print(const Expr& condition);

/// SHA-256 of the canonical source text.
std::string logic_digest(const SynthesisLogic& logic);

/// Fields read by any rule, in first-reference order.
std::vector<std::string> referenced_fields(const SynthesisLogic& logic);

struct AnalysisOptions {
  std::size_t max_space = 100'000;
};

struct AnalysisReport {
  std::vector<std::size_t> unreachable_rules;  // zero-based rule indices
  std::vector<std::string> unread_fields;
  std::vector<std::string> unknown_sensitive_fields;
  bool exhaustive = false;
  std::size_t space_size = 0;
};

/// Quality gate for generated logic. Exhaustive over the product of the
/// referenced fields' value domains when that space fits `max_space`;
/// otherwise shadowing is detected only for structurally repeated
/// conditions and every referenced field is reported as sensitive.
AnalysisReport analyze(const SynthesisLogic& logic, const FeatureSchema& schema, const AnalysisOptions& options = {});

/// Value domain used by the analyzer for one field (always ends with `unknown`).
std::vector<std::string> value_domain(const FieldSpec& field, const SynthesisLogic& logic);

}  // namespace orch::dsl
