#include "orch/core/document.hpp"

#include <atomic>

#include "orch/error.hpp"
#include "orch/util/text.hpp"

namespace orch {

std::string_view to_string(FormatTag tag) noexcept {
  switch (tag) {
    case FormatTag::free_text: return "free_text";
    case FormatTag::structured: return "structured";
    case FormatTag::other: return "other";
  }
  return "other";
}

FormatTag parse_format_tag(std::string_view s) {
  if (s == "free_text") return FormatTag::free_text;
  if (s == "structured") return FormatTag::structured;
  if (s == "other" || s.empty()) return FormatTag::other;
  throw Error(ErrorCode::invalid_argument, "format_tag: '" + std::string(s) + "'");
}

namespace {
std::atomic<std::size_t> g_constructed{0};
}

std::size_t Document::constructed() noexcept { return g_constructed.load(); }

Document::Document(std::string id, std::string body, FormatTag format)
    : id_(std::move(id)), body_(std::move(body)), format_(format) {
  if (util::trim(id_).empty()) throw Error(ErrorCode::invalid_argument, "id: document id must be non-empty");
  if (util::trim(body_).empty()) throw Error(ErrorCode::invalid_argument, "body: document '" + id_ + "' is empty");
  ++g_constructed;
}

}  // namespace orch
