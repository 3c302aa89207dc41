#include <algorithm>
#include <cctype>
#include <limits>
#include <set>

#include "orch/dsl/logic.hpp"
#include "orch/util/sha256.hpp"
#include "orch/util/text.hpp"

namespace orch::dsl {

namespace {

void check_expr(Expr& e, const FeatureSchema& schema, std::vector<Diagnostic>& out) {
  switch (e.kind) {
    case Expr::Kind::all_of:
    case Expr::Kind::any_of:
    case Expr::Kind::negate:
      for (auto& op : e.operands) check_expr(op, schema, out);
      return;
    default:
      break;
  }
  const FieldSpec* field = schema.find(e.field);
  if (!field) {
    out.push_back({ErrorCode::unknown_field, e.pos, e.field, "field is not declared by any subtask schema"});
    return;
  }
  for (auto& v : e.values) {
    auto canon = normalize_value(*field, v);
    if (!canon) {
      out.push_back({ErrorCode::illegal_value, e.pos, v,
                     "value is not legal for " + std::string(to_string(field->kind)) + " field '" + field->name + "'"});
    } else if (*canon == kUnknown) {
      out.push_back({ErrorCode::illegal_value, e.pos, v, "compare against unknown with is_unknown(" + field->name + ")"});
    } else {
      v = *canon;
    }
  }
}

bool value_matches(std::string_view actual, std::string_view literal) {
  return util::casefold(util::trim(actual)) == util::casefold(literal);
}

bool is_bare_word(std::string_view s) {
  if (s.empty()) return false;
  for (char c : s) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.')) return false;
  }
  return !(s == "when" || s == "default" || s == "and" || s == "or" || s == "not" || s == "in" ||
           s == "is_unknown");
}

std::string quote(std::string_view s) {
  if (is_bare_word(s)) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

int precedence(const Expr& e) {
  switch (e.kind) {
    case Expr::Kind::any_of: return 1;
    case Expr::Kind::all_of: return 2;
    case Expr::Kind::negate: return 3;
    default: return 4;
  }
}

void print(const Expr& e, int min_prec, std::string& out) {
  bool parens = precedence(e) < min_prec;
  if (parens) out += '(';
  switch (e.kind) {
    case Expr::Kind::equals: out += e.field + " == " + quote(e.values.front()); break;
    case Expr::Kind::not_equals: out += e.field + " != " + quote(e.values.front()); break;
    case Expr::Kind::member_of: {
      out += e.field + " in {";
      for (std::size_t i = 0; i < e.values.size(); ++i) {
        if (i) out += ", ";
        out += quote(e.values[i]);
      }
      out += '}';
      break;
    }
    case Expr::Kind::is_unknown: out += "is_unknown(" + e.field + ")"; break;
    case Expr::Kind::negate:
      out += "not ";
      print(e.operands.front(), 3, out);
      break;
    case Expr::Kind::all_of:
    case Expr::Kind::any_of: {
      // Same-kind children keep their parentheses so the tree shape survives.
      int child_prec = precedence(e) + 1;
      const char* sep = e.kind == Expr::Kind::all_of ? " and " : " or ";
      for (std::size_t i = 0; i < e.operands.size(); ++i) {
        if (i) out += sep;
        print(e.operands[i], child_prec, out);
      }
      break;
    }
  }
  if (parens) out += ')';
}

void collect_fields(const Expr& e, std::vector<std::string>& out) {
  if (!e.field.empty() && std::find(out.begin(), out.end(), e.field) == out.end()) out.push_back(e.field);
  for (auto& op : e.operands) collect_fields(op, out);
}

void collect_literals(const Expr& e, std::string_view field, std::vector<std::string>& out) {
  if (e.field == field) {
    for (auto& v : e.values) {
      bool seen = std::any_of(out.begin(), out.end(), [&](auto& x) { return util::iequals(x, v); });
      if (!seen) out.push_back(v);
    }
  }
  for (auto& op : e.operands) collect_literals(op, field, out);
}

}  // namespace

std::vector<Diagnostic> check_program(Program& program, const FeatureSchema& schema, const LabelOrder& labels) {
  std::vector<Diagnostic> out;
  for (auto& rule : program.rules) {
    check_expr(rule.condition, schema, out);
    if (!labels.find(rule.label)) {
      out.push_back({ErrorCode::illegal_value, rule.label_pos, rule.label, "label is not one of the output labels"});
    }
  }
  if (program.default_label.empty()) {
    out.push_back({ErrorCode::missing_default, program.end_pos, "", "program has no 'default -> <label>' rule"});
  } else if (!labels.find(program.default_label)) {
    out.push_back({ErrorCode::illegal_value, program.default_pos, program.default_label,
                   "default label is not one of the output labels"});
  }
  return out;
}

SynthesisLogic parse_logic(std::string_view source, const FeatureSchema& schema, const LabelOrder& labels) {
  Program program = parse_program(source);
  auto diagnostics = check_program(program, schema, labels);
  if (!diagnostics.empty()) throw LogicError(diagnostics.front());
  SynthesisLogic logic;
  for (auto& r : program.rules) logic.rules.push_back(Rule{std::move(r.condition), labels.at(r.label), r.pos});
  logic.default_label = labels.at(program.default_label);
  return logic;
}

SynthesisLogic parse_logic(std::string_view source, const std::vector<FeatureSchema>& schemas,
                           const LabelOrder& labels) {
  return parse_logic(source, merge_schemas(schemas), labels);
}

bool holds(const Expr& e, const FeatureSet& features) {
  switch (e.kind) {
    case Expr::Kind::equals:
      return !features.is_unknown(e.field) && value_matches(features.get(e.field), e.values.front());
    case Expr::Kind::not_equals:
      return features.is_unknown(e.field) || !value_matches(features.get(e.field), e.values.front());
    case Expr::Kind::member_of: {
      if (features.is_unknown(e.field)) return false;
      auto actual = features.get(e.field);
      return std::any_of(e.values.begin(), e.values.end(), [&](auto& v) { return value_matches(actual, v); });
    }
    case Expr::Kind::is_unknown: return features.is_unknown(e.field);
    case Expr::Kind::all_of:
      return std::all_of(e.operands.begin(), e.operands.end(), [&](auto& op) { return holds(op, features); });
    case Expr::Kind::any_of:
      return std::any_of(e.operands.begin(), e.operands.end(), [&](auto& op) { return holds(op, features); });
    case Expr::Kind::negate: return !holds(e.operands.front(), features);
  }
  return false;
}

std::size_t deciding_rule(const SynthesisLogic& logic, const FeatureSet& features) {
  for (std::size_t i = 0; i < logic.rules.size(); ++i) {
    if (holds(logic.rules[i].condition, features)) return i;
  }
  return logic.rules.size();
}

OutcomeLabel evaluate(const SynthesisLogic& logic, const FeatureSet& features) {
  auto i = deciding_rule(logic, features);
  return i < logic.rules.size() ? logic.rules[i].label : logic.default_label;
}

std::string pretty_print(const Expr& condition) {
  std::string out;
  print(condition, 0, out);
  return out;
}

std::string pretty_print(const SynthesisLogic& logic) {
  std::string out;
  for (auto& r : logic.rules) out += "when " + pretty_print(r.condition) + " -> " + quote(r.label.name) + "\n";
  out += "default -> " + quote(logic.default_label.name) + "\n";
  return out;
}

std::string logic_digest(const SynthesisLogic& logic) { return util::sha256_hex(pretty_print(logic)); }

std::vector<std::string> referenced_fields(const SynthesisLogic& logic) {
  std::vector<std::string> out;
  for (auto& r : logic.rules) collect_fields(r.condition, out);
  return out;
}

std::vector<std::string> value_domain(const FieldSpec& field, const SynthesisLogic& logic) {
  std::vector<std::string> domain;
  switch (field.kind) {
    case FieldKind::categorical: domain = field.allowed; break;
    case FieldKind::boolean: domain = {"true", "false"}; break;
    case FieldKind::text:
      for (auto& r : logic.rules) collect_literals(r.condition, field.name, domain);
      domain.push_back("\x01other");  // stands for every unmentioned text value
      break;
  }
  domain.emplace_back(kUnknown);
  return domain;
}

AnalysisReport analyze(const SynthesisLogic& logic, const FeatureSchema& schema, const AnalysisOptions& options) {
  AnalysisReport report;
  auto fields = referenced_fields(logic);
  for (auto& f : schema.fields()) {
    if (std::find(fields.begin(), fields.end(), f.name) == fields.end()) report.unread_fields.push_back(f.name);
  }

  std::vector<std::vector<std::string>> domains;
  std::size_t space = 1;
  bool overflow = false;
  for (auto& name : fields) {
    const FieldSpec* spec = schema.find(name);
    FieldSpec fallback{name, FieldKind::text, {}, false, {}};
    domains.push_back(value_domain(spec ? *spec : fallback, logic));
    if (space > std::numeric_limits<std::size_t>::max() / domains.back().size()) {
      overflow = true;
    } else {
      space *= domains.back().size();
    }
  }
  report.space_size = overflow ? std::numeric_limits<std::size_t>::max() : space;

  if (overflow || space > options.max_space) {
    for (std::size_t i = 1; i < logic.rules.size(); ++i) {
      for (std::size_t j = 0; j < i; ++j) {
        if (logic.rules[j].condition == logic.rules[i].condition) {
          report.unreachable_rules.push_back(i);
          break;
        }
      }
    }
    report.unknown_sensitive_fields = fields;
    return report;
  }

  report.exhaustive = true;
  std::vector<bool> reached(logic.rules.size(), false);
  std::vector<bool> sensitive(fields.size(), false);
  std::vector<std::size_t> digits(fields.size(), 0);
  for (std::size_t n = 0; n < space; ++n) {
    FeatureSet point;
    for (std::size_t k = 0; k < fields.size(); ++k) point.set(fields[k], domains[k][digits[k]]);
    auto rule = deciding_rule(logic, point);
    if (rule < logic.rules.size()) reached[rule] = true;
    auto label = rule < logic.rules.size() ? logic.rules[rule].label : logic.default_label;
    for (std::size_t k = 0; k < fields.size(); ++k) {
      if (sensitive[k] || point.is_unknown(fields[k])) continue;
      FeatureSet flipped = point;
      flipped.set(fields[k], std::string(kUnknown));
      if (evaluate(logic, flipped) != label) sensitive[k] = true;
    }
    for (std::size_t k = 0; k < digits.size(); ++k) {
      if (++digits[k] < domains[k].size()) break;
      digits[k] = 0;
    }
  }
  for (std::size_t i = 0; i < reached.size(); ++i) {
    if (!reached[i]) report.unreachable_rules.push_back(i);
  }
  for (std::size_t k = 0; k < fields.size(); ++k) {
    if (sensitive[k]) report.unknown_sensitive_fields.push_back(fields[k]);
  }
  return report;
}

}  // namespace orch::dsl
