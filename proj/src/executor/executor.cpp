#include "orch/executor/executor.hpp"

#include <algorithm>
#include <fstream>
#include <mutex>
#include <set>

#include "orch/core/serialize.hpp"
#include "orch/error.hpp"
#include "orch/executor/extraction.hpp"
#include "orch/util/io.hpp"
#include "orch/util/parallel.hpp"
#include "orch/util/text.hpp"

namespace orch::executor {

using json = nlohmann::json;

std::vector<OutcomeLabel> DocumentPrediction::candidates() const {
  std::vector<OutcomeLabel> out;
  out.reserve(rounds.size());
  for (auto& r : rounds) out.push_back(r.label);
  return out;
}

void require_local(const llm::BackendProfile& profile) {
  if (profile.kind == llm::BackendKind::cloud_http) {
    throw Error(ErrorCode::privacy_violation, "documents are never sent to a cloud backend");
  }
}

Executor::Executor(const llm::Gateway& local, const Plan& plan, ExecutorOptions options)
    : local_(local), plan_(plan), options_(options) {
  require_local(local_.profile());
  if (local_.phase() != llm::Phase::execution) {
    throw Error(ErrorCode::phase_violation, "the executor needs an execution-phase gateway");
  }
  if (options_.rounds < 1) throw Error(ErrorCode::invalid_argument, "rounds: must be at least 1");
  if (options_.workers < 1) throw Error(ErrorCode::invalid_argument, "workers: must be at least 1");
  for (auto& s : plan_.subtasks) {
    auto* p = plan_.find_prompt(s.id);
    if (!p) throw Error(ErrorCode::plan_invalid, "subtask '" + s.id + "' has no prompt");
    bool usable = p->status == PromptStatus::refined || (p->status == PromptStatus::failed && options_.allow_failed);
    if (!usable) {
      throw Error(ErrorCode::unrefined_prompts,
                  "prompt for '" + s.id + "' is " + std::string(to_string(p->status)) + " and cannot run");
    }
  }
}

SubtaskRun Executor::run_subtask(const PromptSpec& prompt, const Document& doc, int round) const {
  require_local(local_.profile());
  auto* subtask = plan_.find_subtask(prompt.subtask_id);
  if (!subtask) throw Error(ErrorCode::invalid_argument, "prompt: unknown subtask '" + prompt.subtask_id + "'");
  // the round index seeds the request so rounds never share a cache entry
  return extract(local_, prompt, *subtask, doc.id(), doc.body(), static_cast<std::uint64_t>(round));
}

DocumentPrediction Executor::run_document(const Document& doc) const {
  require_local(local_.profile());
  DocumentPrediction out;
  out.document_id = doc.id();
  const std::size_t n = plan_.subtasks.size();
  const std::size_t conc = options_.subtask_workers ? options_.subtask_workers : std::max<std::size_t>(n, 1);
  for (int t = 0; t < options_.rounds; ++t) {
    RoundRecord r;
    r.round = t;
    r.runs.resize(n);
    util::parallel_for(n, conc, [&](std::size_t i) {
      r.runs[i] = run_subtask(*plan_.find_prompt(plan_.subtasks[i].id), doc, t);
    });
    for (auto& run : r.runs) {
      for (auto& [field, value] : run.output.values()) r.merged.set(field, value);
    }
    r.deciding_rule = dsl::deciding_rule(plan_.logic, r.merged);
    r.label = dsl::evaluate(plan_.logic, r.merged);
    out.rounds.push_back(std::move(r));
  }
  out.vote = tally(out.candidates());
  return out;
}

std::vector<DocumentPrediction> Executor::run_all(const std::vector<Document>& docs,
                                                  const std::function<void(const DocumentPrediction&)>& on_done) const {
  std::vector<DocumentPrediction> out(docs.size());
  std::mutex mu;
  util::parallel_for(docs.size(), options_.workers, [&](std::size_t i) {
    out[i] = run_document(docs[i]);
    if (on_done) {
      std::lock_guard lock(mu);
      on_done(out[i]);
    }
  });
  return out;
}

std::vector<Document> load_documents(const std::filesystem::path& path) {
  namespace fs = std::filesystem;
  std::vector<Document> docs;
  if (fs::is_directory(path)) {
    std::vector<fs::path> files;
    for (auto& e : fs::directory_iterator(path)) {
      if (e.is_regular_file() && e.path().extension() == ".txt") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (auto& f : files) docs.emplace_back(f.stem().string(), util::read_file(f), FormatTag::free_text);
  } else {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::io, path.string() + ": cannot open");
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (util::trim(line).empty()) continue;
      const std::string where = path.string() + ":" + std::to_string(lineno);
      json j = json_io::parse_json(line, where);
      if (!j.is_object() || !j.contains("id") || !j["id"].is_string() || !j.contains("body") || !j["body"].is_string()) {
        throw Error(ErrorCode::malformed, where + ": needs string \"id\" and \"body\"");
      }
      FormatTag tag = FormatTag::other;
      if (auto it = j.find("format_tag"); it != j.end() && it->is_string()) tag = parse_format_tag(it->get<std::string>());
      docs.emplace_back(j["id"].get<std::string>(), j["body"].get<std::string>(), tag);
    }
  }
  std::set<std::string, std::less<>> seen;
  for (auto& d : docs) {
    if (!seen.insert(d.id()).second) throw Error(ErrorCode::invalid_argument, "documents: duplicate id '" + d.id() + "'");
  }
  return docs;
}

json to_json(const DocumentPrediction& p) {
  json rounds = json::array();
  for (auto& r : p.rounds) {
    json runs = json::array();
    for (auto& run : r.runs) runs.push_back(json_io::to_json(run));
    rounds.push_back({{"round", r.round},
                      {"runs", runs},
                      {"features", json_io::to_json(r.merged)},
                      {"label", r.label.name},
                      {"deciding_rule", r.deciding_rule}});
  }
  json candidates = json::array();
  for (auto& r : p.rounds) candidates.push_back(r.label.name);
  return {{"document_id", p.document_id},
          {"final_label", p.final_label().name},
          {"final_ordinal", p.final_label().ordinal},
          {"candidates", candidates},
          {"votes", p.vote.counts},
          {"tie", p.vote.tie},
          {"voted", p.voted()},
          {"rounds", rounds}};
}

RunSummary summarize(const std::vector<DocumentPrediction>& predictions, int rounds) {
  RunSummary s;
  s.documents = predictions.size();
  s.rounds = rounds;
  for (auto& p : predictions) {
    ++s.final_labels[p.final_label().name];
    if (p.vote.tie) ++s.ties;
    for (auto& r : p.rounds) {
      for (auto& run : r.runs) {
        if (run.parse_status == ParseStatus::repaired) ++s.repaired_runs;
        if (run.parse_status == ParseStatus::unparseable) ++s.unparseable_runs;
      }
    }
  }
  return s;
}

json to_json(const RunSummary& s) {
  return {{"documents", s.documents},       {"rounds", s.rounds},
          {"final_labels", s.final_labels}, {"ties", s.ties},
          {"repaired_runs", s.repaired_runs}, {"unparseable_runs", s.unparseable_runs}};
}

}  // namespace orch::executor
