#include "orch/planner/templates.hpp"

#include <cctype>

#include "orch/error.hpp"
#include "orch/util/io.hpp"
#include "orch/util/sha256.hpp"

namespace orch::planner {

namespace {

struct Builtin {
  const char* name;
  const char* text;
};

// Generated from templates/*.txt at configure time.
constexpr Builtin kBuiltins[] = {
#include "orch/planner/builtin_templates.inc"
};

}  // namespace

TemplateSet TemplateSet::builtin() {
  TemplateSet set;
  for (auto& b : kBuiltins) set.texts_.emplace(b.name, b.text);
  return set;
}

TemplateSet TemplateSet::load(const std::filesystem::path& dir) {
  TemplateSet set;
  for (auto& b : kBuiltins) set.texts_.emplace(b.name, util::read_file(dir / (std::string(b.name) + ".txt")));
  return set;
}

const std::string& TemplateSet::get(std::string_view name) const {
  auto it = texts_.find(name);
  if (it == texts_.end()) throw Error(ErrorCode::invalid_argument, "template '" + std::string(name) + "' is not defined");
  return it->second;
}

std::map<std::string, std::string> TemplateSet::digests() const {
  std::map<std::string, std::string> out;
  for (auto& [name, text] : texts_) out.emplace(std::string(name) + "." + std::string(kVersion), util::sha256_hex(text));
  return out;
}

std::string render(std::string_view tpl, const std::map<std::string, std::string>& vars) {
  std::string out;
  out.reserve(tpl.size());
  std::size_t i = 0;
  while (i < tpl.size()) {
    if (tpl[i] == '{') {
      std::size_t j = i + 1;
      while (j < tpl.size() && (std::isalnum(static_cast<unsigned char>(tpl[j])) || tpl[j] == '_')) ++j;
      if (j < tpl.size() && tpl[j] == '}' && j > i + 1) {
        auto it = vars.find(std::string(tpl.substr(i + 1, j - i - 1)));
        if (it != vars.end()) {
          out += it->second;
          i = j + 1;
          continue;
        }
      }
    }
    out.push_back(tpl[i++]);
  }
  return out;
}

}  // namespace orch::planner
