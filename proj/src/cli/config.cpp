#include "orch/cli/config.hpp"

#include <charconv>
#include <sstream>

#include "orch/error.hpp"
#include "orch/llm/session.hpp"
#include "orch/util/io.hpp"
#include "orch/util/text.hpp"

namespace orch::cli {

namespace {

[[noreturn]] void bad(std::string_view key, const std::string& why) {
  throw Error(ErrorCode::invalid_argument, "config " + std::string(key) + ": " + why);
}

long long integer(std::string_view key, std::string_view v, long long min) {
  long long out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) bad(key, "'" + std::string(v) + "' is not an integer");
  if (out < min) bad(key, "must be at least " + std::to_string(min));
  return out;
}

double real(std::string_view key, std::string_view v) {
  try {
    std::size_t used = 0;
    double d = std::stod(std::string(v), &used);
    if (used != v.size() || d < 0) bad(key, "'" + std::string(v) + "' is not a non-negative number");
    return d;
  } catch (const std::logic_error&) {
    bad(key, "'" + std::string(v) + "' is not a number");
  }
}

std::string resolve(const std::filesystem::path& base, std::string_view v) {
  std::filesystem::path p{std::string(v)};
  if (p.is_relative() && !base.empty()) p = base / p;
  return p.string();
}

bool set_profile(ProfileConfig& p, std::string_view sub, std::string_view key, std::string_view v,
                 const std::filesystem::path& base) {
  if (sub == "kind") {
    if (v == "none") {
      p.kind.reset();
    } else {
      try {
        p.kind = llm::parse_backend_kind(v);
      } catch (const Error& e) {
        bad(key, e.what());
      }
    }
  } else if (sub == "endpoint") {
    p.endpoint = std::string(v);
  } else if (sub == "model") {
    p.model = std::string(v);
  } else if (sub == "temperature") {
    p.temperature = real(key, v);
  } else if (sub == "context") {
    p.context = static_cast<std::size_t>(integer(key, v, 1));
  } else if (sub == "script") {
    p.script = resolve(base, v);
    if (!p.kind) p.kind = llm::BackendKind::scripted;
  } else if (sub == "record") {
    p.session = resolve(base, v);
    p.session_mode = llm::SessionMode::record;
  } else if (sub == "replay") {
    p.session = resolve(base, v);
    p.session_mode = llm::SessionMode::replay;
    p.kind = llm::BackendKind::scripted;
  } else {
    return false;
  }
  return true;
}

llm::BackendProfile build(const ProfileConfig& c, llm::BackendProfile p) {
  if (c.kind) p.kind = *c.kind;
  if (!c.endpoint.empty()) p.endpoint = c.endpoint;
  if (!c.model.empty()) p.model = c.model;
  if (c.temperature) p.default_temperature = *c.temperature;
  if (c.context) p.default_context = *c.context;
  p.script_path = c.script;
  if (c.session_mode == llm::SessionMode::replay) {
    auto r = llm::replay_session(c.session);
    p.kind = r.kind;
    p.session_mode = r.session_mode;
    p.session_path = r.session_path;
  } else if (c.session_mode == llm::SessionMode::record) {
    p = llm::record_session(std::move(p), c.session);
  }
  return p;
}

}  // namespace

void Config::set(std::string_view key, std::string_view raw, const std::filesystem::path& base) {
  auto v = util::trim(raw);
  if (key.starts_with("cloud.")) {
    if (!set_profile(cloud, key.substr(6), key, v, base)) bad(key, "unknown key");
  } else if (key.starts_with("local.")) {
    if (!set_profile(local, key.substr(6), key, v, base)) bad(key, "unknown key");
  } else if (key == "rounds") {
    rounds = static_cast<int>(integer(key, v, 1));
  } else if (key == "threshold") {
    try {
      threshold = Threshold::parse(v);
    } catch (const Error& e) {
      bad(key, e.what());
    }
  } else if (key == "max_iters") {
    max_iters = static_cast<int>(integer(key, v, 1));
  } else if (key == "validation_repeats") {
    validation_repeats = static_cast<int>(integer(key, v, 1));
  } else if (key == "synthetic_cases") {
    synthetic_cases = static_cast<int>(integer(key, v, 1));
  } else if (key == "workers") {
    workers = static_cast<std::size_t>(integer(key, v, 1));
  } else if (key == "max_in_flight") {
    max_in_flight = static_cast<std::size_t>(integer(key, v, 1));
  } else if (key == "max_repairs") {
    max_repairs = static_cast<int>(integer(key, v, 0));
  } else if (key == "retry.max_attempts") {
    retry_attempts = static_cast<int>(integer(key, v, 1));
  } else if (key == "retry.base_delay_ms") {
    retry_base_delay_ms = static_cast<int>(integer(key, v, 0));
  } else if (key == "templates_dir") {
    templates_dir = resolve(base, v);
  } else {
    bad(key, "unknown key");
  }
}

void Config::load_file(const std::filesystem::path& file) {
  std::istringstream in(util::read_file(file));
  const auto base = file.parent_path();
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto t = util::trim(line);
    if (t.empty() || t.front() == '#') continue;
    auto eq = t.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorCode::invalid_argument, file.string() + ":" + std::to_string(lineno) + ": expected key = value");
    }
    try {
      set(util::trim(t.substr(0, eq)), t.substr(eq + 1), base);
    } catch (const Error& e) {
      throw Error(ErrorCode::invalid_argument, file.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

llm::BackendProfile Config::cloud_profile() const {
  if (!cloud.kind) throw Error(ErrorCode::invalid_argument, "no cloud profile configured (set cloud.kind)");
  return build(cloud, llm::BackendProfile::cloud_defaults());
}

llm::BackendProfile Config::local_profile(const bundle::RuntimeDefaults* runtime) const {
  auto base = llm::BackendProfile::local_defaults();
  if (runtime) {
    base.default_temperature = runtime->local_temperature;
    base.default_context = static_cast<std::size_t>(runtime->local_context);
  }
  return build(local, base);
}

bundle::RuntimeDefaults Config::runtime(bundle::RuntimeDefaults base) const {
  if (rounds) base.rounds = *rounds;
  if (threshold) base.threshold = *threshold;
  if (max_iters) base.max_iters = *max_iters;
  if (validation_repeats) base.validation_repeats = *validation_repeats;
  if (local.temperature) base.local_temperature = *local.temperature;
  if (local.context) base.local_context = static_cast<int>(*local.context);
  return base;
}

}  // namespace orch::cli
