// Acceptance checks: one PASS/FAIL line per criterion with its tolerance
// and runtime limit. Exit status is non-zero when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <regex>
#include <set>
#include <sstream>

#include "dsl_oracle.hpp"
#include "orch/bundle/bundle.hpp"
#include "orch/cli/cli.hpp"
#include "orch/core/document.hpp"
#include "orch/core/serialize.hpp"
#include "orch/dsl/logic.hpp"
#include "orch/error.hpp"
#include "orch/evalkit/evalkit.hpp"
#include "orch/executor/vote.hpp"
#include "orch/planner/planner.hpp"
#include "orch/util/io.hpp"
#include "orch/validator/validator.hpp"
#include "support.hpp"

using namespace orch;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool ok = true;
  std::string detail;

  void require(bool cond, const std::string& what) {
    if (!cond && ok) {
      ok = false;
      detail = what;
    }
  }
};

struct Criterion {
  int id;
  std::string title;
  double limit_s;
  std::function<Outcome()> check;
};

int cli_run(const std::vector<std::string>& args, std::map<std::string, std::string> env = {},
            std::string* err_text = nullptr) {
  std::ostringstream out, err;
  int code = cli::run(args, out, err, [env](std::string_view name) -> std::optional<std::string> {
    auto it = env.find(std::string(name));
    if (it == env.end()) return std::nullopt;
    return it->second;
  });
  if (err_text) *err_text = err.str();
  return code;
}

std::string fx(const std::string& name) { return (test::fixtures() / "pancreas" / name).string(); }

// ---- 1: accuracy arithmetic -------------------------------------------------

Outcome metric_arithmetic() {
  Outcome o;
  const LabelOrder stages({"Resectable", "Borderline Resectable", "Locally Advanced", "Metastatic"});
  auto run = [&](int correct, int scored, int excluded, double expected_pct) {
    evalkit::LabeledSet gt("gt"), pred("pred");
    for (int i = 0; i < scored; ++i) {
      const std::string id = "r" + std::to_string(i);
      const std::size_t truth = static_cast<std::size_t>(i % 4);
      gt.add(id, stages.names()[truth]);
      pred.add(id, stages.names()[i < correct ? truth : (truth + 1) % 4]);
    }
    for (int i = 0; i < excluded; ++i) {
      gt.add("x" + std::to_string(i), "indeterminate");
      pred.add("x" + std::to_string(i), "Metastatic");
    }
    auto r = evalkit::evaluate(pred, gt, stages);
    const double pct = r.accuracy * 100.0;
    char buf[160];
    std::snprintf(buf, sizeof buf, "%d/%d -> %.4f%% (want %.2f%% +/- 0.01 pp)", correct, scored, pct, expected_pct);
    o.require(r.n_scored == static_cast<std::size_t>(scored) && r.n_excluded == static_cast<std::size_t>(excluded),
              std::string("scored/excluded counts wrong for ") + buf);
    o.require(std::abs(pct - expected_pct) <= 0.01, buf);
    if (o.ok) o.detail += std::string(o.detail.empty() ? "" : "; ") + buf;
  };
  run(33, 47, 3, 70.21);
  run(41, 48, 2, 85.42);
  return o;
}

// ---- 2: refinement loop ------------------------------------------------------

Outcome refinement_loop() {
  Outcome o;
  Subtask size{"size", "Lesion size", "Size band", "Large is over 2 cm.",
               test::categorical("size_band", {"small", "large"})};
  std::vector<SyntheticCase> cases;
  auto truth = [](int i) { return std::string(i % 2 ? "large" : "small"); };
  auto wrong = [](int i) { return std::string(i % 2 ? "small" : "large"); };
  for (int i = 0; i < 10; ++i) {
    cases.push_back({"size-" + std::to_string(i), "size", "case " + std::to_string(i),
                     test::features({{"size_band", truth(i)}})});
  }
  // the system prompt carries how many cases the fake model answers correctly
  auto backend = test::responder([&](const llm::ChatRequest& r) -> std::optional<std::string> {
    int correct = std::stoi(r.system_prompt.substr(8));
    int i = std::stoi(r.user_content.substr(5));
    return test::reply("size_band", i < correct ? truth(i) : wrong(i));
  });
  auto g = test::gateway(llm::Phase::execution, backend);
  auto prompt = [](int correct, int revision) {
    PromptSpec p;
    p.subtask_id = "size";
    p.instructions = "score " + std::to_string(correct) + " rev " + std::to_string(revision);
    p.system_prompt = "correct=" + std::to_string(correct);
    p.revision = revision;
    return p;
  };
  validator::ValidatorOptions vo;  // 4/5, max_iters 5
  for (int p = 0; p <= 10; ++p) {
    auto refine = [&](const PromptSpec& cur, std::span<const FailureCase>) { return prompt(p, cur.revision + 1); };
    auto r = validator::run_refinement_loop(*g, size, prompt(p, 0), cases, refine, vo);
    const std::string tag = "p=" + std::to_string(p);
    if (p >= 8) {
      o.require(r.refinements == 0 && r.passed(), tag + ": expected zero refinements and a pass");
    } else {
      o.require(r.refinements >= 1, tag + ": expected refinement");
      // a backend stuck at p stops after exactly max_iters and reports failure
      o.require(r.refinements == vo.max_iters, tag + ": stuck loop ran " + std::to_string(r.refinements) + " refinements");
      o.require(r.prompt.status == PromptStatus::failed, tag + ": stuck loop not marked failed");
      o.require(r.history.size() == static_cast<std::size_t>(vo.max_iters + 1), tag + ": history length");
    }
  }
  if (o.ok) o.detail = "p in 0..10, threshold 4/5 exact, max_iters 5";
  return o;
}

// ---- 3: majority vote --------------------------------------------------------

Outcome majority_vote() {
  Outcome o;
  LabelOrder order({"1", "2", "3", "4"});
  auto vote = [&](const std::vector<int>& xs) {
    std::vector<OutcomeLabel> labels;
    for (int x : xs) labels.push_back(order.at(x - 1));
    return std::stoi(executor::majority_vote(labels).name);
  };
  auto brute = [](const std::vector<int>& xs) {
    int count[5] = {0, 0, 0, 0, 0};
    for (int x : xs) ++count[x];
    int best = 4;
    for (int v = 4; v >= 1; --v) {
      if (count[v] > count[best]) best = v;
    }
    return best;
  };
  int agree = 0;
  for (int code = 0; code < 1024; ++code) {
    std::vector<int> xs;
    for (int i = 0, c = code; i < 5; ++i, c /= 4) xs.push_back(c % 4 + 1);
    agree += vote(xs) == brute(xs);
  }
  o.require(agree == 1024, std::to_string(agree) + "/1024 sequences agree");
  o.require(vote({1, 1, 4, 4, 3}) == 4, "[1,1,4,4,3] did not vote 4");
  if (o.ok) o.detail = "1024/1024 agree (100%), [1,1,4,4,3] -> 4";
  return o;
}

// ---- 4: rule language --------------------------------------------------------

Outcome rule_dsl() {
  Outcome o;
  namespace oracle = test::oracle;
  auto programs = json_io::parse_json(util::read_file(test::fixtures() / "dsl" / "programs.json"), "programs");
  std::size_t inputs = 0;
  for (auto& p : programs) {
    oracle::Space space;
    for (auto& f : p["fields"]) {
      space.names.push_back(f["name"]);
      space.values.push_back(f["values"].get<std::vector<std::string>>());
    }
    o.require(space.names.size() <= 4 && space.size() <= 10000, "fixture space too large");
    const std::string source = p["source"];
    auto logic = dsl::parse_logic(source, space.schema(), LabelOrder(p["labels"].get<std::vector<std::string>>()));
    oracle::for_each_assignment(space, [&](const oracle::Assignment& a) {
      auto features = oracle::to_features(space, a);
      oracle::TextInterpreter ti(source, [&](const std::string& f) { return std::string(features.get(f)); });
      ++inputs;
      o.require(dsl::evaluate(logic, features).name == ti.run(), "fixture '" + p["name"].get<std::string>() + "' disagrees");
    });
  }

  std::mt19937_64 rng(20261014);
  oracle::Space space{{"f0", "f1", "f2", "f3"}, {{"a", "b"}, {"a", "b", "c"}, {"x", "y", "z"}, {"m", "n"}}};
  std::vector<std::string> names{"L0", "L1", "L2", "L3"};
  LabelOrder labels(names);
  auto schema = space.schema();
  for (int i = 0; i < 1000 && o.ok; ++i) {
    auto prog = oracle::random_program(rng, space, 4);
    auto src = oracle::render(prog, space, names);
    auto logic = dsl::parse_logic(src, schema, labels);
    // first match: a rule that always fires in front wins everywhere;
    // one that never fires changes nothing
    auto front_true = dsl::parse_logic("when f0 in {a, b} or is_unknown(f0) -> L3\n" + src, schema, labels);
    auto front_false = dsl::parse_logic("when f0 == a and f0 == b -> L3\n" + src, schema, labels);
    oracle::for_each_assignment(space, [&](const oracle::Assignment& a) {
      auto features = oracle::to_features(space, a);
      auto got = dsl::evaluate(logic, features);
      o.require(got.ordinal >= 0 && got.ordinal < 4, "totality: label out of range");
      o.require(got.name == names[static_cast<std::size_t>(oracle::eval(prog, a))],
                "random program disagrees with the reference (unknown-aware) evaluator: " + src);
      o.require(dsl::evaluate(front_true, features).name == "L3", "first-match: leading true rule ignored");
      o.require(dsl::evaluate(front_false, features) == got, "first-match: leading false rule changed the label");
    });
  }
  if (o.ok) {
    o.detail = std::to_string(programs.size()) + " fixture programs over " + std::to_string(inputs) +
               " inputs at 100%; 1000 random programs x " + std::to_string(space.size()) + " inputs";
  }
  return o;
}

// ---- 5: kappa ----------------------------------------------------------------

Outcome kappa() {
  Outcome o;
  o.require(evalkit::kappa_from_matrix({{4, 0, 0}, {0, 3, 0}, {0, 0, 5}}).value == 1.0, "perfect agreement is not 1.0");
  o.require(evalkit::kappa_from_matrix({{1, 1}, {1, 1}}).value == 0.0, "[[1,1],[1,1]] is not 0.0");
  // n 47, trace 37, rows 12,12,12,11, cols 13,12,11,11:
  // p_e = 553/2209, kappa = (37*47 - 553) / (2209 - 553) = 593/828
  const double hand = 593.0 / 828.0;
  const double got = evalkit::kappa_from_matrix({{10, 2, 0, 0}, {3, 8, 1, 0}, {0, 2, 9, 1}, {0, 0, 1, 10}}).value;
  char buf[128];
  std::snprintf(buf, sizeof buf, "4-class kappa %.15f vs 593/828 = %.15f (tol 1e-9)", got, hand);
  o.require(std::abs(got - hand) <= 1e-9, buf);

  std::mt19937 rng(7);
  int held = 0;
  for (int t = 0; t < 1000; ++t) {
    const int k = 2 + static_cast<int>(rng() % 4);
    const int n = 1 + static_cast<int>(rng() % 80);
    std::vector<std::string> names;
    for (int i = 0; i < k; ++i) names.push_back("c" + std::to_string(i));
    evalkit::LabeledSet gt("gt"), pred("pred");
    int diag = 0;
    for (int d = 0; d < n; ++d) {
      int g = static_cast<int>(rng() % static_cast<unsigned>(k)), q = static_cast<int>(rng() % static_cast<unsigned>(k));
      diag += g == q;
      gt.add(std::to_string(d), names[static_cast<std::size_t>(g)]);
      pred.add(std::to_string(d), names[static_cast<std::size_t>(q)]);
    }
    auto r = evalkit::evaluate(pred, gt, LabelOrder(names));
    std::int64_t trace = 0, sum = 0;
    for (std::size_t i = 0; i < r.confusion.size(); ++i) {
      trace += r.confusion[i][i];
      for (auto c : r.confusion[i]) sum += c;
    }
    held += trace == diag && sum == n && r.accuracy == static_cast<double>(trace) / static_cast<double>(sum);
  }
  o.require(held == 1000, "trace identity held on " + std::to_string(held) + "/1000 sets");
  if (o.ok) o.detail = std::string(buf) + "; trace identity 1000/1000";
  return o;
}

// ---- 6: bundle integrity -----------------------------------------------------

Outcome bundle_integrity() {
  Outcome o;
  bundle::PackOptions po;
  po.created_at = "1970-01-01T00:00:00Z";
  const Plan plan = test::sample_plan();
  const std::string a = bundle::pack(plan, bundle::RuntimeDefaults{}, po);
  const std::string b = bundle::pack(plan, bundle::RuntimeDefaults{}, po);
  o.require(a == b, "two packs differ");
  const std::string golden = util::read_file(test::fixtures() / "golden" / "sample.orchb");
  o.require(golden == a, "golden fixture differs from a fresh pack");
  auto back = bundle::unpack(golden);
  o.require(back.plan == plan && back.runtime == bundle::RuntimeDefaults{}, "golden round trip lost data");
  o.require(bundle::pack(back.plan, back.runtime, po) == golden, "repack of the golden bundle differs");

  std::size_t detected = 0;
  for (std::size_t i = 0; i < golden.size(); ++i) {
    std::string m = golden;
    m[i] = static_cast<char>(m[i] ^ 0x01);
    try {
      (void)bundle::unpack(m);
    } catch (const Error&) {
      ++detected;
    }
  }
  o.require(detected == golden.size(),
            std::to_string(detected) + "/" + std::to_string(golden.size()) + " single-byte mutations detected");
  if (o.ok) o.detail = "deterministic, lossless, " + std::to_string(detected) + "/" + std::to_string(golden.size()) + " mutations detected";
  return o;
}

// ---- 7: privacy boundary -----------------------------------------------------

// Planner operations take only planning-side types.
static_assert(std::is_same_v<decltype(&planner::Planner::decompose), Plan (planner::Planner::*)(const TaskSpec&) const>);
static_assert(std::is_same_v<decltype(&planner::Planner::generate_synthetic),
                             planner::SyntheticBatch (planner::Planner::*)(const Subtask&, std::string_view, int) const>);
static_assert(std::is_same_v<decltype(&planner::Planner::attach_synthetic),
                             std::vector<std::string> (planner::Planner::*)(Plan&, std::string_view) const>);
static_assert(std::is_same_v<decltype(&planner::Planner::refine_prompt),
                             PromptSpec (planner::Planner::*)(const TaskSummary&, const Subtask&, const PromptSpec&,
                                                              std::span<const FailureCase>) const>);
static_assert(!std::is_convertible_v<Document, std::string_view> && !std::is_convertible_v<Document, std::string>);

Outcome privacy_boundary() {
  Outcome o;
  // (a) no header reachable from the planner names the document type
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
    o.require(!std::regex_search(text, document_re), "(a) " + rel + " mentions Document");
    for (std::sregex_iterator it(text.begin(), text.end(), include_re), end; it != end; ++it) todo.push_back((*it)[1]);
  }

  // (c) plan, validate and pack in a process that has built no Document
  o.require(Document::constructed() == 0, "(c) a Document was constructed before planning");
  test::TempDir dir;
  const std::string plan = dir / "plan.json", refined = dir / "refined.json", bundle_path = dir / "plan.orchb";
  o.require(cli_run({"--deterministic", "--cloud-script", fx("cloud_script.json"), "plan", "--task", fx("task.txt"),
                     "--guideline", fx("guideline.txt"), "--prefs", fx("prefs.json"), "-o", plan}) == 0,
            "(c) plan failed");
  o.require(cli_run({"--deterministic", "--cloud-script", fx("cloud_script.json"), "--local-script",
                     fx("local_script.json"), "validate", "--plan", plan, "-o", refined}) == 0,
            "(c) validate failed");
  o.require(cli_run({"--deterministic", "pack", "--plan", refined, "-o", bundle_path}) == 0, "(c) pack failed");
  o.require(Document::constructed() == 0, "(c) planning constructed a Document");
  const std::string bytes = o.ok ? util::read_file(bundle_path) : std::string();
  constexpr std::size_t kWindow = 24;
  std::size_t windows = 0;
  for (auto& e : fs::directory_iterator(fx("docs"))) {
    const std::string body = util::read_file(e.path());
    for (std::size_t i = 0; i + kWindow <= body.size(); ++i) {
      ++windows;
      if (bytes.find(std::string_view(body).substr(i, kWindow)) != std::string::npos) {
        o.require(false, "(c) bundle contains bytes of " + e.path().filename().string() + " at offset " + std::to_string(i));
        break;
      }
    }
  }

  // (b) infer refuses while a cloud profile is active, before reading documents
  std::string err;
  int code = cli_run({"--local-script", fx("local_script.json"), "infer", "--bundle", bundle_path, "--docs", fx("docs"),
                      "-o", dir / "preds.jsonl"},
                     {{"ORCH_CLOUD_API_KEY", "sk-acceptance"}}, &err);
  o.require(code == 7, "(b) infer with ORCH_CLOUD_API_KEY exited " + std::to_string(code));
  code = cli_run({"--set", "cloud.kind=cloud_http", "--set", "cloud.endpoint=https://api.example.com/v1", "--local-script",
                  fx("local_script.json"), "infer", "--bundle", bundle_path, "--docs", fx("docs"), "-o", dir / "preds.jsonl"});
  o.require(code == 7, "(b) infer with cloud.kind configured exited " + std::to_string(code));
  o.require(Document::constructed() == 0, "(b) the refused infer read documents");
  if (o.ok) {
    o.detail = std::to_string(seen.size()) + " planner headers clean; infer exit 7; 0 documents loaded, " +
               std::to_string(windows) + " 24-byte windows absent from the bundle";
  }
  return o;
}

// ---- 8: end-to-end replay ----------------------------------------------------

struct RunFiles {
  std::string predictions, report;
};

RunFiles pipeline(const fs::path& dir, const fs::path& sessions, bool record) {
  auto s = [&](const std::string& name) { return (sessions / name).string(); };
  auto d = [&](const std::string& name) { return (dir / name).string(); };
  auto cloud = [&](const std::string& name) {
    return record ? std::vector<std::string>{"--cloud-script", fx("cloud_script.json"), "--cloud-record", s(name)}
                  : std::vector<std::string>{"--cloud-replay", s(name)};
  };
  auto local = [&](const std::string& name) {
    return record ? std::vector<std::string>{"--local-script", fx("local_script.json"), "--local-record", s(name)}
                  : std::vector<std::string>{"--local-replay", s(name)};
  };
  auto join = [](std::vector<std::string> a, const std::vector<std::string>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
  };
  auto must = [](int code, const std::string& stage) {
    if (code != 0) throw std::runtime_error(stage + " exited " + std::to_string(code));
  };
  must(cli_run(join(join({"--deterministic"}, cloud("plan.cloud.jsonl")),
                    {"plan", "--task", fx("task.txt"), "--guideline", fx("guideline.txt"), "--prefs", fx("prefs.json"),
                     "-o", d("plan.json")})),
       "plan");
  must(cli_run(join(join(join({"--deterministic"}, cloud("validate.cloud.jsonl")), local("validate.local.jsonl")),
                    {"validate", "--plan", d("plan.json"), "-o", d("refined.json")})),
       "validate");
  must(cli_run({"--deterministic", "pack", "--plan", d("refined.json"), "-o", d("plan.orchb")}), "pack");
  must(cli_run(join(join({"--deterministic"}, local("infer.local.jsonl")),
                    {"infer", "--bundle", d("plan.orchb"), "--docs", fx("docs"), "-o", d("preds.jsonl")})),
       "infer");
  must(cli_run({"--deterministic", "evaluate", "--pred", d("preds.jsonl"), "--gt", fx("gt.csv"), "--bundle", d("plan.orchb"),
                "--json", d("report.json")}),
       "evaluate");
  return {util::read_file(d("preds.jsonl")), util::read_file(d("report.json"))};
}

Outcome end_to_end() {
  Outcome o;
  test::TempDir sessions, first, second;
  try {
    RunFiles a = pipeline(first.path(), sessions.path(), true);
    RunFiles b = pipeline(second.path(), sessions.path(), false);
    std::size_t lines = static_cast<std::size_t>(std::count(a.predictions.begin(), a.predictions.end(), '\n'));
    o.require(lines == 5, "expected 5 predictions, got " + std::to_string(lines));
    o.require(a.predictions == b.predictions, "predictions differ between recorded and replayed runs");
    o.require(a.report == b.report, "evaluation reports differ between recorded and replayed runs");
    o.require(util::read_file(first / "plan.orchb") == util::read_file(second / "plan.orchb"), "bundles differ");
    if (o.ok) {
      auto report = json::parse(a.report)["reports"][0];
      o.detail = "5 predictions and report byte-identical across record/replay; accuracy " +
                 report["accuracy_percent"].get<std::string>() + " over " + std::to_string(report["n_scored"].get<int>()) +
                 " scored";
    }
  } catch (const std::exception& e) {
    o.require(false, e.what());
  }
  return o;
}

}  // namespace

int main() {
  // 7 runs first: it must observe a process that has not loaded documents.
  std::vector<Criterion> criteria = {
      {7, "privacy boundary", 1.0, privacy_boundary},
      {1, "metric arithmetic (33/47, 41/48)", 1.0, metric_arithmetic},
      {2, "refinement loop semantics", 10.0, refinement_loop},
      {3, "majority vote oracle", 1.0, majority_vote},
      {4, "rule language vs reference interpreters", 30.0, rule_dsl},
      {5, "Cohen's kappa", 5.0, kappa},
      {6, "bundle integrity", 1.0, bundle_integrity},
      {8, "end-to-end record/replay pipeline", 30.0, end_to_end},
  };
  std::map<int, std::string> lines;
  bool all = true;
  for (auto& c : criteria) {
    auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    bool in_time = s < c.limit_s;
    if (!in_time) o.detail += (o.detail.empty() ? "" : "; ") + std::string("over the runtime limit");
    bool pass = o.ok && in_time;
    all = all && pass;
    char head[160];
    std::snprintf(head, sizeof head, "%s %d %s [%.3f s < %.0f s]", pass ? "PASS" : "FAIL", c.id, c.title.c_str(), s,
                  c.limit_s);
    lines[c.id] = std::string(head) + ": " + o.detail;
  }
  for (auto& [_, line] : lines) std::cout << line << "\n";
  return all ? 0 : 1;
}
