#pragma once

#include <cstddef>
#include <string>
#include <string_view>

namespace orch {

enum class FormatTag { free_text, structured, other };

std::string_view to_string(FormatTag tag) noexcept;
FormatTag parse_format_tag(std::string_view s);

/// A sensitive input document. Only the executor side of the pipeline
/// handles these.
class Document {
 public:
  Document(std::string id, std::string body, FormatTag format = FormatTag::other);

  [[nodiscard]] const std::string& id() const noexcept { return id_; }
  [[nodiscard]] const std::string& body() const noexcept { return body_; }
  [[nodiscard]] FormatTag format() const noexcept { return format_; }

  /// Documents built so far in this process (copies not counted); lets
  /// audits confirm a planning run never held one.
  static std::size_t constructed() noexcept;

 private:
  std::string id_;
  std::string body_;
  FormatTag format_;
};

}  // namespace orch
