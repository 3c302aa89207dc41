#include <doctest.h>

#include <fstream>
#include <mutex>
#include <regex>
#include <set>
#include <type_traits>

#include "orch/core/document.hpp"
#include "orch/error.hpp"
#include "orch/planner/planner.hpp"
#include "orch/util/io.hpp"
#include "support.hpp"

using namespace orch;
using namespace orch::planner;
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

// Serves replies in order (repeating the last) and keeps every user message.
struct Sequence {
  std::vector<std::string> replies;
  std::vector<std::string> users;
  std::mutex mu;

  std::shared_ptr<llm::ScriptedBackend> backend() {
    return test::responder([this](const llm::ChatRequest& r) -> std::optional<std::string> {
      std::lock_guard lock(mu);
      users.push_back(r.user_content);
      return replies[std::min(users.size(), replies.size()) - 1];
    });
  }
};

json subtask_json(const std::string& id, const std::string& field, std::vector<std::string> values) {
  return {{"id", id},
          {"name", id + " name"},
          {"description", "Find the " + field + "."},
          {"guideline_excerpt", "Excerpt about " + field + "."},
          {"output_schema", {{"fields", {{{"name", field}, {"kind", "categorical"}, {"values", values}}}}}},
          {"instructions", "Read the report and report the " + field + "."}};
}

json good_plan_reply() {
  return {{"subtasks", {subtask_json("size", "size_band", {"small", "large"}),
                        subtask_json("spread", "spread", {"none", "local"})}},
          {"logic", "when spread == local -> High\nwhen size_band == large -> Mid\ndefault -> Low"}};
}

TaskSpec sample_task(int max_subtasks = 4) {
  UserPrefs prefs;
  prefs.output_labels = {"Low", "Mid", "High"};
  prefs.max_subtasks = max_subtasks;
  prefs.synthetic_cases_per_subtask = 3;
  prefs.output_format_notes = "Lower-case values.";
  return TaskSpec("Grade lesions from a report.", "Large is over 2 cm. Local spread is High.", prefs);
}

Planner make_planner(const llm::Gateway& g, int max_repairs = 2) {
  PlannerOptions o;
  o.max_repairs = max_repairs;
  o.deterministic = true;
  return Planner(g, TemplateSet::builtin(), o);
}

json cases_reply(std::vector<std::pair<std::string, std::string>> rows, const std::string& field = "size_band") {
  json arr = json::array();
  for (auto& [input, value] : rows) arr.push_back({{"input", input}, {"expected", {{field, value}}}});
  return {{"cases", arr}};
}

}  // namespace

TEST_CASE("planner refuses an execution-phase gateway") {
  Sequence seq{{"{}"}};
  auto g = test::gateway(llm::Phase::execution, seq.backend());
  CHECK(code_of([&] { Planner(*g, TemplateSet::builtin()); }) == ErrorCode::phase_violation);
}

TEST_CASE("decompose builds draft prompts and parsed logic") {
  Sequence seq{{good_plan_reply().dump()}};
  auto g = test::gateway(llm::Phase::planning, seq.backend());
  TaskSpec task = sample_task();
  Plan plan = make_planner(*g).decompose(task);

  REQUIRE(plan.subtasks.size() == 2);
  REQUIRE(plan.prompts.size() == 2);
  CHECK(seq.users.size() == 1);
  CHECK(seq.users[0].find(task.guideline()) != std::string::npos);
  CHECK(seq.users[0].find("1. Low\n2. Mid\n3. High") != std::string::npos);
  CHECK(plan.task.guideline_sha256 == util::sha256_hex(task.guideline()));
  CHECK(plan.logic.rules.size() == 2);
  CHECK(plan.provenance.created_at == util::kEpochTimestamp);
  CHECK(plan.provenance.planner_model == "scripted");
  CHECK(plan.provenance.template_digests == TemplateSet::builtin().digests());
  for (auto& p : plan.prompts) {
    CHECK(p.status == PromptStatus::draft);
    CHECK(p.revision == 0);
    CHECK_FALSE(p.validation.has_value());
  }
  const std::string& sp = plan.prompts[0].system_prompt;
  CHECK(sp.rfind("Read the report and report the size_band.", 0) == 0);
  for (const char* part : {"Subtask id: size", "Task context:\nGrade lesions", "Guideline background:\nExcerpt about size_band.",
                           "Output format:", "- size_band (required): one of \"small\", \"large\", or \"unknown\"",
                           "Additional formatting notes: Lower-case values."}) {
    CHECK_MESSAGE(sp.find(part) != std::string::npos, part);
  }
  CHECK(validate_plan(plan).empty());
}

TEST_CASE("decompose repairs a rejected reply and names the problems") {
  json bad = good_plan_reply();
  bad["logic"] = "when spreads == local -> High\ndefault -> Low";
  Sequence seq{{"Here is my plan in prose.", bad.dump(), good_plan_reply().dump()}};
  auto g = test::gateway(llm::Phase::planning, seq.backend());
  Plan plan = make_planner(*g).decompose(sample_task());
  REQUIRE(seq.users.size() == 3);
  CHECK(plan.subtasks.size() == 2);
  CHECK(seq.users[1].find("## Your previous reply was rejected") != std::string::npos);
  CHECK(seq.users[1].find("no JSON object") != std::string::npos);
  CHECK(seq.users[1].find("Here is my plan in prose.") != std::string::npos);
  CHECK(seq.users[2].find("spreads") != std::string::npos);
}

TEST_CASE("decompose gives up after the repair budget") {
  SUBCASE("never parses: malformed_plan") {
    Sequence seq{{"no json here"}};
    auto g = test::gateway(llm::Phase::planning, seq.backend());
    CHECK(code_of([&] { (void)make_planner(*g, 2).decompose(sample_task()); }) == ErrorCode::malformed_plan);
    CHECK(seq.users.size() == 3);
  }
  SUBCASE("parses but stays inconsistent: budget_exceeded") {
    Sequence seq{{good_plan_reply().dump()}};
    auto g = test::gateway(llm::Phase::planning, seq.backend());
    CHECK(code_of([&] { (void)make_planner(*g, 1).decompose(sample_task(1)); }) == ErrorCode::budget_exceeded);
    CHECK(seq.users.size() == 2);
  }
  SUBCASE("missing instructions are structural") {
    json bad = good_plan_reply();
    bad["subtasks"][0].erase("instructions");
    Sequence seq{{bad.dump()}};
    auto g = test::gateway(llm::Phase::planning, seq.backend());
    CHECK(code_of([&] { (void)make_planner(*g, 0).decompose(sample_task()); }) == ErrorCode::malformed_plan);
  }
  SUBCASE("zero repairs means one call") {
    Sequence seq{{"prose", good_plan_reply().dump()}};
    auto g = test::gateway(llm::Phase::planning, seq.backend());
    CHECK(code_of([&] { (void)make_planner(*g, 0).decompose(sample_task()); }) == ErrorCode::malformed_plan);
    CHECK(seq.users.size() == 1);
  }
}

TEST_CASE("synthetic generation") {
  Plan plan = test::sample_plan();
  const Subtask& size = plan.subtasks[0];

  SUBCASE("exact count with sequential ids") {
    Sequence seq{{cases_reply({{"a 3 cm mass", "large"}, {"a 1 cm mass", "small"}, {"5 mm", "small"}}).dump()}};
    auto g = test::gateway(llm::Phase::planning, seq.backend());
    auto batch = make_planner(*g).generate_synthetic(size, "guideline", 3);
    REQUIRE(batch.cases.size() == 3);
    CHECK(batch.cases[0].id == "size-01");
    CHECK(batch.cases[2].id == "size-03");
    CHECK(batch.cases[0].subtask_id == "size");
    CHECK(batch.cases[0].expected.get("size_band") == "large");
    CHECK(batch.warnings.empty());
    CHECK(batch.repairs == 0);
  }
  SUBCASE("surplus cases are dropped") {
    Sequence seq{{cases_reply({{"a", "large"}, {"b", "small"}, {"c", "small"}, {"d", "small"}}).dump()}};
    auto g = test::gateway(llm::Phase::planning, seq.backend());
    CHECK(make_planner(*g).generate_synthetic(size, "g", 2).cases.size() == 2);
  }
  SUBCASE("too few cases trigger a repair") {
    Sequence seq{{cases_reply({{"a", "large"}}).dump(), cases_reply({{"a", "large"}, {"b", "small"}}).dump()}};
    auto g = test::gateway(llm::Phase::planning, seq.backend());
    auto batch = make_planner(*g).generate_synthetic(size, "g", 2);
    CHECK(batch.cases.size() == 2);
    CHECK(batch.repairs == 1);
    CHECK(seq.users[1].find("expected 2 cases, got 1") != std::string::npos);
  }
  SUBCASE("values outside the schema trigger a repair") {
    Sequence seq{{cases_reply({{"a", "huge"}, {"b", "small"}}).dump(), cases_reply({{"a", "large"}, {"b", "small"}}).dump()}};
    auto g = test::gateway(llm::Phase::planning, seq.backend());
    auto batch = make_planner(*g).generate_synthetic(size, "g", 2);
    CHECK(batch.cases[0].expected.get("size_band") == "large");
    CHECK(seq.users[1].find("huge") != std::string::npos);
  }
  SUBCASE("missing coverage is repaired when reachable") {
    Sequence seq{{cases_reply({{"a", "small"}, {"b", "small"}}).dump(), cases_reply({{"a", "large"}, {"b", "small"}}).dump()}};
    auto g = test::gateway(llm::Phase::planning, seq.backend());
    auto batch = make_planner(*g).generate_synthetic(size, "g", 2);
    CHECK(batch.repairs == 1);
    CHECK(batch.warnings.empty());
    CHECK(seq.users[1].find("size_band=large") != std::string::npos);
  }
  SUBCASE("coverage never reached leaves a warning") {
    Sequence seq{{cases_reply({{"a", "small"}, {"b", "small"}}).dump()}};
    auto g = test::gateway(llm::Phase::planning, seq.backend());
    auto batch = make_planner(*g, 1).generate_synthetic(size, "g", 2);
    CHECK(batch.cases.size() == 2);
    REQUIRE(batch.warnings.size() == 1);
    CHECK(batch.warnings[0].find("never expects size_band=large") != std::string::npos);
  }
  SUBCASE("an earlier well-formed reply is kept when later ones break") {
    Sequence seq{{cases_reply({{"a", "small"}, {"b", "small"}}).dump(), "prose"}};
    auto g = test::gateway(llm::Phase::planning, seq.backend());
    auto batch = make_planner(*g, 1).generate_synthetic(size, "g", 2);
    CHECK(batch.cases.size() == 2);
    CHECK(batch.warnings.size() == 1);
  }
  SUBCASE("unreachable coverage is flagged up front") {
    Sequence seq{{cases_reply({{"a", "small"}}).dump()}};
    auto g = test::gateway(llm::Phase::planning, seq.backend());
    auto batch = make_planner(*g).generate_synthetic(size, "g", 1);
    CHECK(batch.coverage_unreachable);
    CHECK(batch.repairs == 0);
    REQUIRE(batch.warnings.size() == 1);
    CHECK(batch.warnings[0].rfind("coverage_unreachable", 0) == 0);
  }
  SUBCASE("exhaustion throws malformed_cases") {
    Sequence seq{{"{\"cases\": 3}"}};
    auto g = test::gateway(llm::Phase::planning, seq.backend());
    CHECK(code_of([&] { (void)make_planner(*g).generate_synthetic(size, "g", 2); }) == ErrorCode::malformed_cases);
    CHECK(seq.users.size() == 3);
  }
  SUBCASE("count must be positive") {
    Sequence seq{{"{}"}};
    auto g = test::gateway(llm::Phase::planning, seq.backend());
    CHECK(code_of([&] { (void)make_planner(*g).generate_synthetic(size, "g", 0); }) == ErrorCode::invalid_argument);
  }
}

TEST_CASE("attach_synthetic fills every subtask") {
  Plan plan = test::sample_plan();
  plan.synthetic_sets.clear();
  auto backend = test::responder([](const llm::ChatRequest& r) -> std::optional<std::string> {
    if (r.user_content.find("Subtask id: size") != std::string::npos ||
        r.user_content.find("size_band") != std::string::npos) {
      return cases_reply({{"3 cm", "large"}, {"1 cm", "small"}}).dump();
    }
    return cases_reply({{"nodes", "local"}, {"clean", "none"}}, "spread").dump();
  });
  auto g = test::gateway(llm::Phase::planning, backend);
  auto warnings = make_planner(*g).attach_synthetic(plan, "guideline");
  CHECK(warnings.empty());
  CHECK(plan.synthetic_sets.at("size").size() == 2);
  CHECK(plan.synthetic_sets.at("spread").size() == 2);
  CHECK(plan.synthetic_sets.at("spread")[0].expected.get("spread") == "local");
  CHECK(validate_plan(plan, {.min_cases_per_subtask = 2}).empty());
}

TEST_CASE("refine_prompt sends failures with reasoning and bumps the revision") {
  Plan plan = test::sample_plan();
  const Subtask& size = plan.subtasks[0];
  PromptSpec current = *plan.find_prompt("size");
  current.status = PromptStatus::draft;
  current.validation.reset();

  FailureCase f;
  f.expected = plan.synthetic_sets.at("size")[0];
  f.actual.subtask_id = "size";
  f.actual.document_id = f.expected.id;
  f.actual.reasoning = "I thought 25 mm was small";
  f.actual.output = FeatureSet::conforming(size.output_schema, {{"size_band", "small"}});
  std::vector<FailureCase> failures{f};

  Sequence seq{{json{{"instructions", current.instructions}}.dump(),
                json{{"instructions", "Convert millimetres to centimetres before comparing with 2 cm."}}.dump()}};
  auto g = test::gateway(llm::Phase::planning, seq.backend());
  PromptSpec next = make_planner(*g).refine_prompt(plan.task, size, current, failures);

  CHECK(next.revision == current.revision + 1);
  CHECK(next.status == PromptStatus::draft);
  CHECK(next.instructions == "Convert millimetres to centimetres before comparing with 2 cm.");
  CHECK(next.system_prompt.find("Subtask id: size") != std::string::npos);
  REQUIRE(seq.users.size() == 2);
  CHECK(seq.users[0].find("I thought 25 mm was small") != std::string::npos);
  CHECK(seq.users[0].find("### Case " + f.expected.id) != std::string::npos);
  CHECK(seq.users[0].find(f.expected.input_text) != std::string::npos);
  CHECK(seq.users[1].find("identical") != std::string::npos);

  std::vector<FailureCase> none;
  CHECK(code_of([&] { (void)make_planner(*g).refine_prompt(plan.task, size, current, none); }) ==
        ErrorCode::invalid_argument);
  Sequence stuck{{"prose"}};
  auto g2 = test::gateway(llm::Phase::planning, stuck.backend());
  CHECK(code_of([&] { (void)make_planner(*g2).refine_prompt(plan.task, size, current, failures); }) ==
        ErrorCode::malformed_plan);
}

TEST_CASE("template rendering and loading") {
  CHECK(render("{a} and {b} {c}", {{"a", "{b}"}, {"b", "x"}}) == "{b} and x {c}");
  auto builtin = TemplateSet::builtin();
  for (const char* name : {"decompose", "synthetic", "refine", "repair", "planner_system"}) {
    CHECK_FALSE(builtin.get(name).empty());
  }
  CHECK(code_of([&] { (void)builtin.get("nope"); }) == ErrorCode::invalid_argument);
  auto loaded = TemplateSet::load(test::source_dir() / "templates");
  CHECK(loaded.digests() == builtin.digests());
  test::TempDir empty;
  CHECK_THROWS_AS(TemplateSet::load(empty.path()), Error);
}

// The planning interface must never be able to receive document content.
static_assert(std::is_same_v<decltype(&Planner::decompose), Plan (Planner::*)(const TaskSpec&) const>);
static_assert(std::is_same_v<decltype(&Planner::generate_synthetic),
                             SyntheticBatch (Planner::*)(const Subtask&, std::string_view, int) const>);
static_assert(std::is_same_v<decltype(&Planner::attach_synthetic),
                             std::vector<std::string> (Planner::*)(Plan&, std::string_view) const>);
static_assert(std::is_same_v<decltype(&Planner::refine_prompt),
                             PromptSpec (Planner::*)(const TaskSummary&, const Subtask&, const PromptSpec&,
                                                     std::span<const FailureCase>) const>);
static_assert(!std::is_convertible_v<Document, std::string_view>);
static_assert(!std::is_constructible_v<TaskSpec, Document, std::string, UserPrefs>);
static_assert(!std::is_constructible_v<SyntheticCase, Document>);

TEST_CASE("no header reachable from the planner mentions documents") {
  const auto include_root = test::source_dir() / "include";
  const std::regex include_re(R"re(#include\s+"(orch/[^"]+)")re");
  const std::regex document_re(R"(\bDocument\b|document\.hpp)");
  std::set<std::string> seen;
  std::vector<std::string> todo{"orch/planner/planner.hpp", "orch/planner/templates.hpp"};
  while (!todo.empty()) {
    std::string rel = todo.back();
    todo.pop_back();
    if (!seen.insert(rel).second) continue;
    std::string text = util::read_file(include_root / rel);
    CHECK_MESSAGE(!std::regex_search(text, document_re), rel);
    for (std::sregex_iterator it(text.begin(), text.end(), include_re), end; it != end; ++it) todo.push_back((*it)[1]);
  }
  CHECK(seen.size() >= 6);
}
