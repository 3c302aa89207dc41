#pragma once

#include <string>
#include <string_view>

namespace orch::util {

/// SHA-256 of the bytes, lowercase hex.
std::string sha256_hex(std::string_view bytes);

bool is_sha256_hex(std::string_view s) noexcept;

}  // namespace orch::util
