#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace orch::util {

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);
void append_line(const std::filesystem::path& path, std::string_view line);

/// RFC 3339 UTC timestamp, second resolution.
std::string utc_now();

inline constexpr std::string_view kEpochTimestamp = "1970-01-01T00:00:00Z";

}  // namespace orch::util
