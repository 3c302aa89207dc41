#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace orch::util {

std::string_view trim(std::string_view s) noexcept;

/// ASCII case folding; non-ASCII bytes pass through untouched.
std::string casefold(std::string_view s);

bool iequals(std::string_view a, std::string_view b) noexcept;

std::vector<std::string> split(std::string_view s, char sep);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

/// Locates the first balanced top-level JSON object in free-form model
/// output (markdown fences, leading prose). Returns nullopt if none.
std::optional<std::string_view> find_json_object(std::string_view text) noexcept;

std::string excerpt(std::string_view s, std::size_t max_chars);

}  // namespace orch::util
