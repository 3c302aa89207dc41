#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>

namespace orch::planner {

/// Versioned meta-prompt templates with named `{placeholder}` slots.
class TemplateSet {
 public:
  static constexpr std::string_view kVersion = "v1";

  /// Templates compiled into the binary from templates/.
  static TemplateSet builtin();
  /// Loads <name>.txt for every template name from `dir`.
  static TemplateSet load(const std::filesystem::path& dir);

  [[nodiscard]] const std::string& get(std::string_view name) const;
  /// name -> SHA-256 of the template text.
  [[nodiscard]] std::map<std::string, std::string> digests() const;

 private:
  std::map<std::string, std::string, std::less<>> texts_;
};

/// Single-pass substitution of `{name}` for every name in `vars`; other
/// braces are left alone and substituted text is not rescanned.
std::string render(std::string_view tpl, const std::map<std::string, std::string>& vars);

}  // namespace orch::planner
