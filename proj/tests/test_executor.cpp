#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <mutex>
#include <random>
#include <set>

#include "orch/core/document.hpp"
#include "orch/error.hpp"
#include "orch/executor/executor.hpp"
#include "orch/executor/extraction.hpp"
#include "orch/executor/vote.hpp"
#include "orch/llm/session.hpp"
#include "support.hpp"

using namespace orch;
using namespace orch::executor;
using json = nlohmann::json;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an orch::Error");
  return ErrorCode::invalid_argument;
}

bool asks(const llm::ChatRequest& r, const std::string& subtask) {
  return r.system_prompt.find("Subtask id: " + subtask + "\n") != std::string::npos;
}

// Answers from the text: "cm" sizes over 2 are large, "invades" means local spread.
std::optional<std::string> reader(const llm::ChatRequest& r) {
  const std::string& u = r.user_content;
  if (asks(r, "size")) {
    auto pos = u.find(" cm");
    if (pos == std::string::npos) return test::reply("size_band", "unknown");
    double cm = std::stod(u.substr(u.rfind(' ', pos - 1) + 1));
    return test::reply("size_band", cm > 2 ? "large" : "small");
  }
  return test::reply("spread", u.find("invades") != std::string::npos ? "local" : "none");
}

std::vector<OutcomeLabel> numbered(const LabelOrder& order, std::vector<int> ordinals) {
  std::vector<OutcomeLabel> out;
  for (int o : ordinals) out.push_back(order.at(o - 1));
  return out;
}

// Independent reference: count, then scan from the top ordinal down.
int reference_vote(const std::vector<int>& xs, int k) {
  std::vector<int> count(static_cast<std::size_t>(k) + 1, 0);
  for (int x : xs) ++count[static_cast<std::size_t>(x)];
  int best = k;
  for (int o = k; o >= 1; --o) {
    if (count[static_cast<std::size_t>(o)] > count[static_cast<std::size_t>(best)]) best = o;
  }
  return best;
}

}  // namespace

TEST_CASE("parse_reply accepts wrapped and flat objects") {
  FeatureSchema schema({FieldSpec{"size_band", FieldKind::categorical, {"small", "large"}},
                        FieldSpec{"calcified", FieldKind::boolean, {}}});
  std::vector<std::string> problems;

  auto wrapped = parse_reply(R"(Sure: {"reasoning": "3 cm", "output": {"size_band": "Large", "calcified": true}})", schema,
                             problems);
  REQUIRE(wrapped);
  CHECK(wrapped->reasoning == "3 cm");
  CHECK(wrapped->output.get("size_band") == "large");
  CHECK(wrapped->output.get("calcified") == "true");

  auto flat = parse_reply(R"({"size_band": "small", "note": "ignored"})", schema, problems);
  REQUIRE(flat);
  CHECK(flat->output.get("size_band") == "small");
  CHECK(flat->output.get("calcified") == kUnknown);

  auto nulls = parse_reply(R"({"output": {"size_band": null, "calcified": "unknown"}})", schema, problems);
  REQUIRE(nulls);
  CHECK(nulls->output.get("size_band") == kUnknown);
  CHECK(problems.empty());

  CHECK_FALSE(parse_reply("I cannot tell.", schema, problems));
  CHECK_FALSE(parse_reply(R"({"unrelated": 1})", schema, problems));
  CHECK_FALSE(parse_reply(R"({"size_band": "enormous"})", schema, problems));
  CHECK(problems.size() == 3);
}

TEST_CASE("extract: ok, repaired, unparseable") {
  Plan plan = test::sample_plan();
  const Subtask& size = plan.subtasks[0];
  const PromptSpec& prompt = *plan.find_prompt("size");
  std::vector<llm::ChatRequest> seen;
  std::mutex mu;
  auto backend = test::responder([&](const llm::ChatRequest& r) -> std::optional<std::string> {
    std::lock_guard lock(mu);
    seen.push_back(r);
    if (r.user_content.rfind("prose", 0) == 0) {
      if (r.user_content.find("## Format repair") != std::string::npos) return test::reply("size_band", "small");
      return std::string("It is small.");
    }
    if (r.user_content.rfind("never", 0) == 0) return std::string("no idea");
    if (r.user_content.rfind("down", 0) == 0) throw Error(ErrorCode::transport, "connection refused");
    return test::reply("size_band", "large", "over 2 cm");
  });
  auto g = test::gateway(llm::Phase::execution, backend);

  SubtaskRun ok = extract(*g, prompt, size, "d1", "A 3 cm lesion", 4);
  CHECK(ok.parse_status == ParseStatus::ok);
  CHECK(ok.output.get("size_band") == "large");
  CHECK(ok.reasoning == "over 2 cm");
  CHECK(ok.document_id == "d1");
  CHECK(ok.subtask_id == "size");
  REQUIRE(seen.size() == 1);
  CHECK(seen[0].system_prompt == prompt.system_prompt);
  CHECK(seen[0].seed == 4u);
  CHECK(seen[0].response_schema.has_value());

  SubtaskRun repaired = extract(*g, prompt, size, "d2", "prose report", 0);
  CHECK(repaired.parse_status == ParseStatus::repaired);
  CHECK(repaired.output.get("size_band") == "small");
  CHECK(seen.size() == 3);

  SubtaskRun bad = extract(*g, prompt, size, "d3", "never", 0);
  CHECK(bad.parse_status == ParseStatus::unparseable);
  CHECK(bad.output.get("size_band") == kUnknown);
  CHECK_FALSE(bad.error.empty());
  CHECK(seen.size() == 5);

  SubtaskRun down = extract(*g, prompt, size, "d4", "down", 0);
  CHECK(down.parse_status == ParseStatus::unparseable);
  CHECK(down.error.find("connection refused") != std::string::npos);
}

TEST_CASE("extract propagates replay misses") {
  Plan plan = test::sample_plan();
  test::TempDir dir;
  std::ofstream(dir / "empty.jsonl").close();
  auto replay = std::make_shared<llm::ReplayBackend>(dir / "empty.jsonl");
  auto g = test::gateway(llm::Phase::execution, replay);
  CHECK(code_of([&] { (void)extract(*g, plan.prompts[0], plan.subtasks[0], "d", "text", 0); }) ==
        ErrorCode::unseen_request);
}

TEST_CASE("vote: worked examples") {
  LabelOrder order({"1", "2", "3", "4"});
  CHECK(majority_vote(numbered(order, {2, 2, 3, 2, 3})).ordinal == 1);
  CHECK(majority_vote(numbered(order, {1, 1, 4, 4, 3})).name == "4");
  CHECK(majority_vote(numbered(order, {1, 2, 3})).name == "3");
  auto t = tally(numbered(order, {1, 1, 4, 4, 3}));
  CHECK(t.tie);
  CHECK(t.counts.at("1") == 2);
  CHECK(t.counts.at("3") == 1);
  CHECK_FALSE(tally(numbered(order, {2, 2, 3, 2, 3})).tie);
  CHECK(code_of([] { (void)tally({}); }) == ErrorCode::invalid_argument);
}

TEST_CASE("vote: all 4^5 sequences match the reference and ignore order") {
  LabelOrder order({"1", "2", "3", "4"});
  int checked = 0;
  for (int code = 0; code < 1024; ++code) {
    std::vector<int> xs;
    for (int i = 0, c = code; i < 5; ++i, c /= 4) xs.push_back(c % 4 + 1);
    const int expected = reference_vote(xs, 4);
    CHECK(majority_vote(numbered(order, xs)).name == std::to_string(expected));
    std::vector<int> perm = xs;
    std::sort(perm.begin(), perm.end());
    do {
      if (majority_vote(numbered(order, perm)).name != std::to_string(expected)) FAIL("order changed the vote");
    } while (std::next_permutation(perm.begin(), perm.end()));
    ++checked;
  }
  CHECK(checked == 1024);
}

TEST_CASE("executor refuses cloud backends, wrong phases and unrefined prompts") {
  Plan plan = test::sample_plan();
  auto backend = test::responder(reader);

  auto cloud = llm::BackendProfile::cloud_defaults();
  cloud.kind = llm::BackendKind::cloud_http;
  llm::Gateway cloud_gw(llm::Phase::planning, cloud, backend);
  CHECK(code_of([&] { Executor(cloud_gw, plan); }) == ErrorCode::privacy_violation);
  CHECK(code_of([&] { require_local(cloud); }) == ErrorCode::privacy_violation);
  CHECK_NOTHROW(require_local(llm::BackendProfile::local_defaults()));

  auto planning = test::gateway(llm::Phase::planning, backend);
  CHECK(code_of([&] { Executor(*planning, plan); }) == ErrorCode::phase_violation);

  auto local = test::gateway(llm::Phase::execution, backend);
  Plan draft = plan;
  draft.prompts[1].status = PromptStatus::draft;
  draft.prompts[1].validation.reset();
  CHECK(code_of([&] { Executor(*local, draft); }) == ErrorCode::unrefined_prompts);

  Plan failed = plan;
  failed.prompts[1].status = PromptStatus::failed;
  failed.prompts[1].validation = ValidationSummary{0, 2, Threshold{}, 5};
  CHECK(code_of([&] { Executor(*local, failed); }) == ErrorCode::unrefined_prompts);
  CHECK_NOTHROW(Executor(*local, failed, ExecutorOptions{.allow_failed = true}));
}

TEST_CASE("rounds are seeded by index and synthesized by the rule program") {
  Plan plan = test::sample_plan();
  std::mutex mu;
  std::multiset<std::pair<std::string, std::uint64_t>> seeds;
  auto backend = test::responder([&](const llm::ChatRequest& r) {
    std::lock_guard lock(mu);
    seeds.insert({asks(r, "size") ? "size" : "spread", *r.seed});
    return reader(r);
  });
  auto g = test::gateway(llm::Phase::execution, backend);
  Executor ex(*g, plan, ExecutorOptions{.rounds = 3});

  Document doc("d1", "A 3 cm lesion.");
  DocumentPrediction p = ex.run_document(doc);
  REQUIRE(p.rounds.size() == 3);
  CHECK(p.voted());
  CHECK(p.final_label().name == "Mid");
  for (int i = 0; i < 3; ++i) {
    CHECK(p.rounds[static_cast<std::size_t>(i)].round == i);
    CHECK(p.rounds[static_cast<std::size_t>(i)].deciding_rule == 1);
    CHECK(seeds.count({"size", static_cast<std::uint64_t>(i)}) == 1);
    CHECK(seeds.count({"spread", static_cast<std::uint64_t>(i)}) == 1);
  }
  REQUIRE(p.rounds[0].runs.size() == 2);
  CHECK(p.rounds[0].runs[0].subtask_id == "size");
  CHECK(p.rounds[0].merged.get("spread") == "none");
  CHECK(p.vote.counts.at("Mid") == 3);

  SubtaskRun single = ex.run_subtask(plan.prompts[1], Document("d2", "It invades fat."), 2);
  CHECK(single.output.get("spread") == "local");
}

TEST_CASE("a split vote goes to the majority and a tie to the higher stage") {
  Plan plan = test::sample_plan();
  // spread is local on even seeds only, so rounds 0,2,4 say High and 1,3 say Mid
  auto backend = test::responder([](const llm::ChatRequest& r) -> std::optional<std::string> {
    if (asks(r, "size")) return test::reply("size_band", "large");
    return test::reply("spread", *r.seed % 2 == 0 ? "local" : "none");
  });
  auto g = test::gateway(llm::Phase::execution, backend);
  Document doc("d", "text");
  auto five = Executor(*g, plan, ExecutorOptions{.rounds = 5}).run_document(doc);
  CHECK(five.final_label().name == "High");
  CHECK(five.vote.counts.at("High") == 3);
  CHECK_FALSE(five.vote.tie);
  auto two = Executor(*g, plan, ExecutorOptions{.rounds = 2}).run_document(doc);
  CHECK(two.vote.tie);
  CHECK(two.final_label().name == "High");
  auto one = Executor(*g, plan, ExecutorOptions{.rounds = 1}).run_document(doc);
  CHECK_FALSE(one.voted());
  auto c = five.candidates();
  REQUIRE(c.size() == 5);
  CHECK(c[1].name == "Mid");
}

TEST_CASE("run_all keeps input order across workers") {
  Plan plan = test::sample_plan();
  auto g = test::gateway(llm::Phase::execution, test::responder(reader));
  std::vector<Document> docs;
  for (int i = 0; i < 12; ++i) {
    std::string body = i % 3 == 0 ? "It invades fat." : "A " + std::to_string(i) + " cm lesion.";
    docs.emplace_back("doc-" + std::to_string(i), body);
  }
  std::vector<std::string> done;
  Executor ex(*g, plan, ExecutorOptions{.rounds = 2, .workers = 4});
  auto preds = ex.run_all(docs, [&](const DocumentPrediction& p) { done.push_back(p.document_id); });
  REQUIRE(preds.size() == docs.size());
  CHECK(done.size() == docs.size());
  for (std::size_t i = 0; i < docs.size(); ++i) {
    CHECK(preds[i].document_id == docs[i].id());
    std::string want = i % 3 == 0 ? "High" : (i > 2 ? "Mid" : "Low");
    CHECK_MESSAGE(preds[i].final_label().name == want, docs[i].id());
  }
  auto summary = summarize(preds, 2);
  CHECK(summary.documents == 12);
  CHECK(summary.final_labels.at("High") == 4);
  CHECK(summary.unparseable_runs == 0);

  json j = to_json(preds[0]);
  CHECK(j["document_id"] == "doc-0");
  CHECK(j["final_label"] == "High");
  CHECK(j["votes"]["High"] == 2);
  CHECK(j["rounds"].size() == 2);
  CHECK(to_json(summary)["documents"] == 12);
}

TEST_CASE("load_documents from a directory or JSON lines") {
  test::TempDir dir;
  std::filesystem::create_directories(dir.path() / "docs");
  std::ofstream(dir.path() / "docs" / "b.txt") << "second";
  std::ofstream(dir.path() / "docs" / "a.txt") << "first";
  std::ofstream(dir.path() / "docs" / "notes.md") << "skip";
  auto docs = load_documents(dir.path() / "docs");
  REQUIRE(docs.size() == 2);
  CHECK(docs[0].id() == "a");
  CHECK(docs[0].body() == "first");
  CHECK(docs[0].format() == FormatTag::free_text);

  std::ofstream(dir / "docs.jsonl") << R"({"id": "x", "body": "one", "format_tag": "structured"})" << "\n\n"
                                    << R"({"id": "y", "body": "two"})" << "\n";
  auto lines = load_documents(dir / "docs.jsonl");
  REQUIRE(lines.size() == 2);
  CHECK(lines[0].format() == FormatTag::structured);
  CHECK(lines[1].format() == FormatTag::other);

  std::ofstream(dir / "dup.jsonl") << R"({"id": "x", "body": "one"})" << "\n" << R"({"id": "x", "body": "two"})" << "\n";
  CHECK(code_of([&] { (void)load_documents(dir / "dup.jsonl"); }) == ErrorCode::invalid_argument);
  std::ofstream(dir / "bad.jsonl") << R"({"id": 3})" << "\n";
  CHECK(code_of([&] { (void)load_documents(dir / "bad.jsonl"); }) == ErrorCode::malformed);
  CHECK(code_of([&] { (void)load_documents(dir / "missing.jsonl"); }) == ErrorCode::io);
}
