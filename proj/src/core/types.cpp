#include "orch/core/types.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <numeric>
#include <set>

#include "orch/error.hpp"
#include "orch/util/text.hpp"

namespace orch {

namespace {

bool is_identifier(std::string_view s) {
  if (s.empty()) return false;
  auto ok_first = [](char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; };
  auto ok_rest = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; };
  if (!ok_first(s.front())) return false;
  return std::all_of(s.begin() + 1, s.end(), ok_rest);
}

[[noreturn]] void invalid(const std::string& what) { throw Error(ErrorCode::invalid_argument, what); }

}  // namespace

std::string_view to_string(FieldKind kind) noexcept {
  switch (kind) {
    case FieldKind::categorical: return "categorical";
    case FieldKind::boolean: return "boolean";
    case FieldKind::text: return "text";
  }
  return "categorical";
}

FieldKind parse_field_kind(std::string_view s) {
  if (s == "categorical") return FieldKind::categorical;
  if (s == "boolean") return FieldKind::boolean;
  if (s == "text") return FieldKind::text;
  invalid("kind: unsupported field kind '" + std::string(s) + "'");
}

FeatureSchema::FeatureSchema(std::vector<FieldSpec> fields) : fields_(std::move(fields)) {
  std::set<std::string> names;
  for (auto& f : fields_) {
    if (!is_identifier(f.name)) invalid("fields.name: '" + f.name + "' is not an identifier");
    if (!names.insert(f.name).second) invalid("fields.name: duplicate field '" + f.name + "'");
    if (f.kind == FieldKind::categorical) {
      if (f.allowed.empty()) invalid("fields." + f.name + ".allowed: categorical field needs at least one value");
      std::set<std::string> folded;
      for (auto& v : f.allowed) {
        auto key = util::casefold(util::trim(v));
        if (key.empty()) invalid("fields." + f.name + ".allowed: empty value");
        if (key == kUnknown) invalid("fields." + f.name + ".allowed: 'unknown' is implicit and reserved");
        if (!folded.insert(key).second) invalid("fields." + f.name + ".allowed: duplicate value '" + v + "'");
      }
    } else if (!f.allowed.empty()) {
      invalid("fields." + f.name + ".allowed: only categorical fields list values");
    }
    for (auto& [alias, target] : f.aliases) {
      FieldSpec bare = f;
      bare.aliases.clear();
      auto canon = normalize_value(bare, target);
      if (!canon || *canon == kUnknown) {
        invalid("fields." + f.name + ".aliases: '" + alias + "' maps to illegal value '" + target + "'");
      }
    }
  }
}

const FieldSpec* FeatureSchema::find(std::string_view name) const noexcept {
  for (auto& f : fields_) {
    if (f.name == name) return &f;
  }
  return nullptr;
}

FeatureSchema merge_schemas(const std::vector<FeatureSchema>& schemas) {
  std::vector<FieldSpec> all;
  std::set<std::string> seen;
  for (auto& s : schemas) {
    for (auto& f : s.fields()) {
      if (seen.insert(f.name).second) all.push_back(f);
    }
  }
  return FeatureSchema(std::move(all));
}

std::optional<std::string> normalize_value(const FieldSpec& field, std::string_view raw) {
  auto trimmed = util::trim(raw);
  auto folded = util::casefold(trimmed);
  if (folded == kUnknown) return std::string(kUnknown);
  for (auto& [alias, target] : field.aliases) {
    if (util::casefold(util::trim(alias)) == folded) {
      folded = util::casefold(util::trim(target));
      trimmed = target;
      break;
    }
  }
  switch (field.kind) {
    case FieldKind::categorical:
      for (auto& v : field.allowed) {
        if (util::casefold(util::trim(v)) == folded) return v;
      }
      return std::nullopt;
    case FieldKind::boolean:
      if (folded == "true" || folded == "yes") return std::string("true");
      if (folded == "false" || folded == "no") return std::string("false");
      return std::nullopt;
    case FieldKind::text:
      return std::string(util::trim(trimmed));
  }
  return std::nullopt;
}

FeatureSet FeatureSet::conforming(const FeatureSchema& schema, const Map& raw) {
  Map out;
  for (auto& [name, value] : raw) {
    auto* field = schema.find(name);
    if (!field) invalid("features." + name + ": not declared in schema");
    auto canon = normalize_value(*field, value);
    if (!canon) invalid("features." + name + ": illegal value '" + value + "'");
    out.emplace(name, std::move(*canon));
  }
  for (auto& f : schema.fields()) {
    if (f.required && !out.contains(f.name)) invalid("features." + f.name + ": required field missing");
  }
  return FeatureSet(std::move(out));
}

FeatureSet FeatureSet::all_unknown(const FeatureSchema& schema) {
  Map out;
  for (auto& f : schema.fields()) out.emplace(f.name, std::string(kUnknown));
  return FeatureSet(std::move(out));
}

std::string_view FeatureSet::get(std::string_view field) const noexcept {
  auto it = values_.find(field);
  return it == values_.end() ? kUnknown : std::string_view(it->second);
}

bool FeatureSet::is_unknown(std::string_view field) const noexcept {
  return util::iequals(get(field), kUnknown);
}

std::vector<std::string> conformance_errors(const FeatureSchema& schema, const FeatureSet& set) {
  std::vector<std::string> errors;
  for (auto& [name, value] : set.values()) {
    auto* field = schema.find(name);
    if (!field) {
      errors.push_back("field '" + name + "' not declared in schema");
      continue;
    }
    auto canon = normalize_value(*field, value);
    if (!canon || *canon != value) errors.push_back("field '" + name + "' has illegal value '" + value + "'");
  }
  for (auto& f : schema.fields()) {
    if (f.required && !set.values().contains(f.name)) errors.push_back("required field '" + f.name + "' missing");
  }
  return errors;
}

LabelOrder::LabelOrder(std::vector<std::string> names) : names_(std::move(names)) {
  if (names_.size() < 2) invalid("output_labels: at least two labels required");
  std::set<std::string> seen;
  for (auto& n : names_) {
    if (util::trim(n).empty()) invalid("output_labels: empty label");
    if (!seen.insert(n).second) invalid("output_labels: duplicate label '" + n + "'");
  }
}

std::optional<OutcomeLabel> LabelOrder::find(std::string_view name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return OutcomeLabel{names_[i], static_cast<int>(i)};
  }
  return std::nullopt;
}

OutcomeLabel LabelOrder::at(std::string_view name) const {
  auto label = find(name);
  if (!label) invalid("label: '" + std::string(name) + "' is not an output label");
  return *label;
}

OutcomeLabel LabelOrder::at(int ordinal) const {
  if (ordinal < 0 || static_cast<std::size_t>(ordinal) >= names_.size()) {
    invalid("label: ordinal " + std::to_string(ordinal) + " out of range");
  }
  return OutcomeLabel{names_[static_cast<std::size_t>(ordinal)], ordinal};
}

void UserPrefs::check() const {
  (void)LabelOrder(output_labels);
  if (max_subtasks < 1) invalid("max_subtasks: must be positive");
  if (synthetic_cases_per_subtask < 1) invalid("synthetic_cases_per_subtask: must be positive");
}

TaskSpec::TaskSpec(std::string task_description, std::string guideline, UserPrefs prefs)
    : task_description_(std::move(task_description)), guideline_(std::move(guideline)), prefs_(std::move(prefs)) {
  if (util::trim(task_description_).empty()) invalid("task_description: must be non-empty");
  if (util::trim(guideline_).empty()) invalid("guideline: must be non-empty");
  prefs_.check();
}

namespace {
std::int64_t parse_count(std::string_view s) {
  s = util::trim(s);
  if (s.empty() || s.size() > 12) invalid("threshold: expected n/d with positive integers");
  std::int64_t v = 0;
  for (char c : s) {
    if (c < '0' || c > '9') invalid("threshold: expected n/d with positive integers");
    v = v * 10 + (c - '0');
  }
  return v;
}
}  // namespace

Threshold Threshold::parse(std::string_view decimal) {
  auto s = util::trim(decimal);
  if (auto slash = s.find('/'); slash != std::string_view::npos) {
    auto n = parse_count(s.substr(0, slash));
    auto d = parse_count(s.substr(slash + 1));
    if (n <= 0 || d <= 0 || n > d) invalid("threshold: must lie in (0, 1]");
    auto g = std::gcd(n, d);
    Threshold t{n / g, d / g};
    return t;
  }
  std::int64_t num = 0;
  std::int64_t den = 1;
  bool seen_point = false;
  bool any_digit = false;
  for (char c : s) {
    if (c == '.' && !seen_point) {
      seen_point = true;
    } else if (c >= '0' && c <= '9') {
      any_digit = true;
      if (den > 1'000'000'000 || num > 1'000'000'000) invalid("threshold: too many digits");
      num = num * 10 + (c - '0');
      if (seen_point) den *= 10;
    } else {
      invalid("threshold: '" + std::string(s) + "' is not a decimal");
    }
  }
  if (!any_digit) invalid("threshold: empty");
  auto g = std::gcd(num, den);
  Threshold t{g ? num / g : num, g ? den / g : den};
  if (t.numerator <= 0 || t.numerator > t.denominator) invalid("threshold: must lie in (0, 1]");
  return t;
}

std::string Threshold::to_string() const {
  return std::to_string(numerator) + "/" + std::to_string(denominator);
}

std::string_view to_string(ParseStatus s) noexcept {
  switch (s) {
    case ParseStatus::ok: return "ok";
    case ParseStatus::repaired: return "repaired";
    case ParseStatus::unparseable: return "unparseable";
  }
  return "ok";
}

ParseStatus parse_parse_status(std::string_view s) {
  if (s == "ok") return ParseStatus::ok;
  if (s == "repaired") return ParseStatus::repaired;
  if (s == "unparseable") return ParseStatus::unparseable;
  invalid("parse_status: '" + std::string(s) + "'");
}

}  // namespace orch
