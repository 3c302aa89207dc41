#include "orch/cli/cli.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <memory>

#include "orch/bundle/bundle.hpp"
#include "orch/cli/config.hpp"
#include "orch/core/serialize.hpp"
#include "orch/evalkit/evalkit.hpp"
#include "orch/executor/executor.hpp"
#include "orch/llm/gateway.hpp"
#include "orch/planner/planner.hpp"
#include "orch/util/io.hpp"
#include "orch/util/sha256.hpp"
#include "orch/util/text.hpp"
#include "orch/validator/validator.hpp"

namespace orch::cli {

namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

// Carries an exit code chosen by the command rather than by error class.
struct CommandExit : std::runtime_error {
  int code;
  CommandExit(int c, const std::string& msg) : std::runtime_error(msg), code(c) {}
};

struct Globals {
  std::string config_path;
  std::vector<std::string> overrides;
  bool deterministic = false;
  std::string cloud_script, cloud_record, cloud_replay;
  std::string local_script, local_record, local_replay;
};

struct Ctx {
  Config cfg;
  bool deterministic = false;
  std::ostream& out;
  std::ostream& err;
  const EnvLookup& env;
};

Config load_config(const Globals& g, const EnvLookup& env) {
  Config cfg;
  std::string path = g.config_path;
  if (path.empty()) {
    if (auto p = env("ORCH_CONFIG")) path = *p;
  }
  if (!path.empty()) cfg.load_file(path);
  for (auto& kv : g.overrides) {
    auto eq = kv.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::invalid_argument, "--set expects key=value, got '" + kv + "'");
    cfg.set(util::trim(std::string_view(kv).substr(0, eq)), std::string_view(kv).substr(eq + 1), fs::current_path());
  }
  auto apply = [&](std::string_view prefix, const std::string& script, const std::string& rec, const std::string& rep) {
    if (!script.empty()) {
      cfg.set(std::string(prefix) + "kind", "scripted");
      cfg.set(std::string(prefix) + "script", script);
    }
    if (!rec.empty()) cfg.set(std::string(prefix) + "record", rec);
    if (!rep.empty()) cfg.set(std::string(prefix) + "replay", rep);
  };
  apply("cloud.", g.cloud_script, g.cloud_record, g.cloud_replay);
  apply("local.", g.local_script, g.local_record, g.local_replay);
  return cfg;
}

llm::GatewayOptions gateway_options(const Config& cfg) {
  llm::GatewayOptions o;
  o.max_in_flight = cfg.max_in_flight;
  o.retry.max_attempts = cfg.retry_attempts;
  o.retry.base_delay = std::chrono::milliseconds(cfg.retry_base_delay_ms);
  return o;
}

planner::TemplateSet templates(const Config& cfg) {
  return cfg.templates_dir.empty() ? planner::TemplateSet::builtin() : planner::TemplateSet::load(cfg.templates_dir);
}

std::string timestamp(const Ctx& c) { return c.deterministic ? std::string(util::kEpochTimestamp) : util::utc_now(); }

Plan read_plan(const std::string& path) {
  return json_io::plan_from_json(json_io::parse_json(util::read_file(path), path));
}

void write_plan(const std::string& path, const Plan& plan) {
  util::write_file(path, json_io::canonical_dump(json_io::to_json(plan)));
}

bundle::ArtifactBundle read_bundle(const std::string& path) {
  std::string bytes = util::read_file(path);
  try {
    return bundle::unpack(bytes);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::checksum_mismatch || e.code() == ErrorCode::version_incompatible ||
        e.code() == ErrorCode::malformed) {
      throw CommandExit(kTamper, path + ": bundle rejected: " + e.what());
    }
    throw;
  }
}

// ---- plan ------------------------------------------------------------------

struct PlanArgs {
  std::string task, guideline, prefs, out;
};

int cmd_plan(Ctx& c, const PlanArgs& a) {
  const std::string description = util::read_file(a.task);
  const std::string guideline = util::read_file(a.guideline);
  UserPrefs defaults;
  defaults.synthetic_cases_per_subtask = c.cfg.synthetic_cases;
  UserPrefs prefs;
  try {
    prefs = json_io::prefs_from_json(json_io::parse_json(util::read_file(a.prefs), a.prefs), defaults);
  } catch (const Error& e) {
    throw Error(ErrorCode::invalid_argument, a.prefs + ": " + e.what());
  }
  TaskSpec task(description, guideline, prefs);

  auto cloud = llm::open_gateway(llm::Phase::planning, c.cfg.cloud_profile(), gateway_options(c.cfg));
  planner::PlannerOptions po;
  po.max_repairs = c.cfg.max_repairs;
  po.deterministic = c.deterministic;
  po.workers = c.cfg.max_in_flight;
  planner::Planner planner(*cloud, templates(c.cfg), po);

  Plan plan = planner.decompose(task);
  for (auto& w : planner.attach_synthetic(plan, guideline)) c.err << "warning: " << w << "\n";
  write_plan(a.out, plan);
  std::size_t cases = 0;
  for (auto& [_, v] : plan.synthetic_sets) cases += v.size();
  c.out << "plan: " << plan.subtasks.size() << " subtasks, " << cases << " synthetic cases -> " << a.out << "\n";
  return kOk;
}

// ---- validate --------------------------------------------------------------

struct ValidateArgs {
  std::string plan, out, history;
  std::optional<int> max_iters;
  std::string threshold;
};

int cmd_validate(Ctx& c, const ValidateArgs& a) {
  Plan plan = read_plan(a.plan);
  auto runtime = c.cfg.runtime();
  if (a.max_iters) runtime.max_iters = *a.max_iters;
  if (!a.threshold.empty()) runtime.threshold = Threshold::parse(a.threshold);
  runtime.check();

  auto local = llm::open_gateway(llm::Phase::execution, c.cfg.local_profile(), gateway_options(c.cfg));
  std::unique_ptr<llm::Gateway> cloud;
  std::unique_ptr<planner::Planner> planner;
  if (c.cfg.cloud_configured()) {
    cloud = llm::open_gateway(llm::Phase::planning, c.cfg.cloud_profile(), gateway_options(c.cfg));
    planner::PlannerOptions po;
    po.max_repairs = c.cfg.max_repairs;
    po.deterministic = c.deterministic;
    planner = std::make_unique<planner::Planner>(*cloud, templates(c.cfg), po);
  }

  validator::ValidatorOptions vo;
  vo.threshold = runtime.threshold;
  vo.max_iters = runtime.max_iters;
  vo.repeats = runtime.validation_repeats;
  vo.workers = c.cfg.max_in_flight;

  json history = json::array();
  bool any_failed = false;
  for (auto& subtask : plan.subtasks) {
    PromptSpec* prompt = plan.find_prompt(subtask.id);
    auto it = plan.synthetic_sets.find(subtask.id);
    if (!prompt || it == plan.synthetic_sets.end() || it->second.empty()) {
      throw Error(ErrorCode::invalid_argument, a.plan + ": subtask '" + subtask.id + "' lacks a prompt or synthetic cases");
    }
    PromptSpec start = *prompt;
    start.status = PromptStatus::draft;
    start.validation.reset();
    validator::Refiner refine = [&](const PromptSpec& cur, std::span<const FailureCase> failures) {
      if (!planner) {
        throw Error(ErrorCode::invalid_argument, "subtask '" + subtask.id + "' needs refinement but no cloud profile is configured");
      }
      return planner->refine_prompt(plan.task, subtask, cur, failures);
    };
    auto result = validator::run_refinement_loop(*local, subtask, start, it->second, refine, vo);
    *prompt = result.prompt;
    any_failed = any_failed || !result.passed();
    history.push_back(validator::to_json(result));
    auto& s = *result.prompt.validation;
    c.out << subtask.id << ": " << to_string(result.prompt.status) << ", revision " << result.prompt.revision << ", "
          << s.passes << "/" << s.total << " (" << evalkit::format_percent(s.pass_rate()) << "), "
          << result.refinements << " refinement(s)\n";
  }
  write_plan(a.out, plan);
  if (!a.history.empty()) {
    json doc = {{"threshold", runtime.threshold.to_string()},
                {"max_iters", runtime.max_iters},
                {"validation_repeats", runtime.validation_repeats},
                {"subtasks", history}};
    util::write_file(a.history, json_io::canonical_dump(doc));
  }
  return any_failed ? kFailedPrompts : kOk;
}

// ---- pack / unpack ---------------------------------------------------------

struct PackArgs {
  std::string plan, out, guideline;
  bool allow_failed = false;
};

int cmd_pack(Ctx& c, const PackArgs& a) {
  Plan plan = read_plan(a.plan);
  bundle::PackOptions po;
  po.allow_failed = a.allow_failed;
  po.created_at = timestamp(c);
  if (!a.guideline.empty()) po.guideline_text = util::read_file(a.guideline);
  std::string bytes = bundle::pack(plan, c.cfg.runtime(), po);
  util::write_file(a.out, bytes);
  c.out << "packed " << plan.subtasks.size() << " subtasks -> " << a.out << " (sha256 "
        << util::sha256_hex(std::string_view(bytes).substr(0, bytes.rfind("#sha256:"))) << ")\n";
  return kOk;
}

struct UnpackArgs {
  std::string bundle, out;
};

int cmd_unpack(Ctx& c, const UnpackArgs& a) {
  auto b = read_bundle(a.bundle);
  c.out << "bundle " << a.bundle << ": format " << b.format_version << ", created " << b.created_at << "\n";
  c.out << "  task digest " << b.task_digest << "\n";
  for (auto& p : b.plan.prompts) {
    c.out << "  " << p.subtask_id << ": " << to_string(p.status) << ", revision " << p.revision << "\n";
  }
  c.out << "  rounds " << b.runtime.rounds << ", threshold " << b.runtime.threshold.to_string()
        << (b.allow_failed ? ", failed prompts allowed" : "") << "\n";
  if (!a.out.empty()) write_plan(a.out, b.plan);
  return kOk;
}

// ---- infer -----------------------------------------------------------------

struct InferArgs {
  std::string bundle, docs, out, summary;
  std::optional<int> rounds;
  bool revalidate = false;
  bool scripted_ack = false;
};

bool scripted_local(const Config& cfg) {
  return cfg.local.kind == llm::BackendKind::scripted || cfg.local.session_mode == llm::SessionMode::replay;
}

void privacy_guard(const Ctx& c, bool ack) {
  if (c.cfg.local.kind == llm::BackendKind::cloud_http) {
    throw CommandExit(kPrivacyRefusal, "infer: the local profile names a cloud backend; documents never leave the host");
  }
  const bool key = c.env("ORCH_CLOUD_API_KEY").has_value();
  const bool active = c.cfg.cloud_configured() || key;
  if (!active) return;
  const bool cloud_harmless = !c.cfg.cloud.kind || *c.cfg.cloud.kind == llm::BackendKind::scripted;
  if (ack && cloud_harmless && scripted_local(c.cfg)) return;
  throw CommandExit(kPrivacyRefusal,
              std::string("infer: refusing to run while a cloud profile is active (") +
                  (key ? "ORCH_CLOUD_API_KEY is set" : "cloud.kind is configured") +
                  "); unset it, or pass --i-know-this-is-scripted with scripted backends");
}

int cmd_infer(Ctx& c, const InferArgs& a) {
  privacy_guard(c, a.scripted_ack);
  auto b = read_bundle(a.bundle);
  auto runtime = c.cfg.runtime(b.runtime);
  if (a.rounds) runtime.rounds = *a.rounds;
  runtime.check();

  auto profile = c.cfg.local_profile(&runtime);
  auto local = llm::open_gateway(llm::Phase::execution, profile, gateway_options(c.cfg));

  if (a.revalidate) {
    validator::ValidatorOptions vo;
    vo.threshold = runtime.threshold;
    vo.repeats = runtime.validation_repeats;
    vo.workers = c.cfg.max_in_flight;
    bool failed = false;
    for (auto& s : b.plan.subtasks) {
      auto& cases = b.plan.synthetic_sets.at(s.id);
      auto report = validator::validate_prompt(*local, s, *b.plan.find_prompt(s.id), cases, vo);
      c.out << "revalidate " << s.id << ": " << report.passes << "/" << report.total << " " << to_string(report.verdict)
            << "\n";
      failed = failed || report.verdict != validator::Verdict::passed;
    }
    if (failed) throw CommandExit(kFailedPrompts, "infer: revalidation failed; no documents were read");
  }

  auto docs = executor::load_documents(a.docs);
  executor::ExecutorOptions eo;
  eo.rounds = runtime.rounds;
  eo.workers = c.cfg.workers;
  eo.allow_failed = b.allow_failed;
  executor::Executor ex(*local, b.plan, eo);
  auto predictions = ex.run_all(docs);

  std::string lines;
  for (auto& p : predictions) lines += executor::to_json(p).dump() + "\n";
  util::write_file(a.out, lines);
  auto summary = executor::summarize(predictions, runtime.rounds);
  json sj = executor::to_json(summary);
  sj["bundle_sha256"] = b.file_sha256;
  std::string summary_path = a.summary.empty() ? a.out + ".summary.json" : a.summary;
  util::write_file(summary_path, json_io::canonical_dump(sj));
  c.out << "infer: " << predictions.size() << " documents, " << runtime.rounds << " round(s) -> " << a.out << "\n";
  for (auto& [label, n] : summary.final_labels) c.out << "  " << label << ": " << n << "\n";
  if (summary.unparseable_runs) c.err << "warning: " << summary.unparseable_runs << " unparseable subtask run(s)\n";
  return kOk;
}

// ---- evaluate --------------------------------------------------------------

struct EvaluateArgs {
  std::vector<std::string> preds;
  std::string gt, labels, bundle, json_out, csv_dir;
};

int cmd_evaluate(Ctx& c, const EvaluateArgs& a) {
  auto gt = evalkit::read_labeled(a.gt, "gt");
  LabelOrder order;
  if (!a.labels.empty()) {
    std::vector<std::string> names;
    for (auto& n : util::split(a.labels, ',')) names.emplace_back(util::trim(n));
    order = LabelOrder(names);
  } else if (!a.bundle.empty()) {
    order = read_bundle(a.bundle).plan.labels();
  } else {
    order = evalkit::infer_labels(gt);
  }
  std::vector<evalkit::EvalReport> reports;
  for (auto& p : a.preds) reports.push_back(evalkit::evaluate(evalkit::read_labeled(p), gt, order));
  c.out << evalkit::render_table(reports);
  if (!a.json_out.empty()) {
    json arr = json::array();
    for (auto& r : reports) arr.push_back(evalkit::to_json(r));
    util::write_file(a.json_out, json_io::canonical_dump({{"reports", arr}}));
  }
  if (!a.csv_dir.empty()) {
    for (auto& r : reports) util::write_file(fs::path(a.csv_dir) / ("confusion_" + r.source + ".csv"), evalkit::confusion_csv(r));
  }
  return kOk;
}

}  // namespace

int exit_code_for(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::malformed_plan:
    case ErrorCode::budget_exceeded:
    case ErrorCode::malformed_cases:
    case ErrorCode::backend_refusal:
    case ErrorCode::unseen_request: return kPlannerFailure;
    case ErrorCode::transport:
    case ErrorCode::truncated: return kTransport;
    case ErrorCode::unrefined_prompts: return kFailedPrompts;
    case ErrorCode::checksum_mismatch:
    case ErrorCode::version_incompatible: return kTamper;
    case ErrorCode::privacy_violation:
    case ErrorCode::phase_violation: return kPrivacyRefusal;
    case ErrorCode::invalid_argument:
    case ErrorCode::io:
    case ErrorCode::malformed:
    case ErrorCode::syntax_error:
    case ErrorCode::unknown_field:
    case ErrorCode::illegal_value:
    case ErrorCode::missing_default:
    case ErrorCode::plan_invalid:
    case ErrorCode::id_mismatch: return kInvalidInput;
  }
  return kOther;
}

EnvLookup process_env() {
  return [](std::string_view name) -> std::optional<std::string> {
    const char* v = std::getenv(std::string(name).c_str());
    if (!v) return std::nullopt;
    return std::string(v);
  };
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, const EnvLookup& env) {
  CLI::App app{"Two-phase LLM orchestration: plan in the cloud, execute locally", "orch"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config_path, "Configuration file (default: $ORCH_CONFIG)");
  app.add_option("--set", g.overrides, "Override a configuration key (key=value)");
  app.add_flag("--deterministic", g.deterministic, "Fixed timestamps for reproducible outputs");
  app.add_option("--cloud-script", g.cloud_script, "Scripted planning backend");
  app.add_option("--cloud-record", g.cloud_record, "Record planning exchanges to a session file");
  app.add_option("--cloud-replay", g.cloud_replay, "Replay planning exchanges from a session file");
  app.add_option("--local-script", g.local_script, "Scripted execution backend");
  app.add_option("--local-record", g.local_record, "Record execution exchanges to a session file");
  app.add_option("--local-replay", g.local_replay, "Replay execution exchanges from a session file");

  PlanArgs pa;
  auto* plan = app.add_subcommand("plan", "Decompose the task and generate synthetic cases");
  plan->add_option("--task", pa.task, "Task description (text file)")->required();
  plan->add_option("--guideline", pa.guideline, "Guideline document (text file)")->required();
  plan->add_option("--prefs", pa.prefs, "User preferences (JSON)")->required();
  plan->add_option("-o,--out", pa.out, "Plan file to write")->required();

  ValidateArgs va;
  auto* validate = app.add_subcommand("validate", "Validate and refine prompts against synthetic cases");
  validate->add_option("--plan", va.plan, "Plan file")->required();
  validate->add_option("-o,--out", va.out, "Refined plan file to write")->required();
  validate->add_option("--emit-history", va.history, "Write the full validation history (JSON)");
  validate->add_option("--max-iters", va.max_iters, "Refinement budget per subtask")->check(CLI::PositiveNumber);
  validate->add_option("--threshold", va.threshold, "Pass-rate threshold, e.g. 0.80");

  PackArgs ka;
  auto* pack = app.add_subcommand("pack", "Pack a validated plan into a .orchb bundle");
  pack->add_option("--plan", ka.plan, "Plan file")->required();
  pack->add_option("-o,--out", ka.out, "Bundle file to write")->required();
  pack->add_option("--embed-guideline", ka.guideline, "Include the guideline text in the bundle");
  pack->add_flag("--allow-failed", ka.allow_failed, "Include prompts whose refinement failed");

  UnpackArgs ua;
  auto* unpack = app.add_subcommand("unpack", "Verify a bundle and optionally extract its plan");
  unpack->add_option("bundle", ua.bundle, "Bundle file")->required();
  unpack->add_option("-o,--out", ua.out, "Plan file to write");

  InferArgs ia;
  auto* infer = app.add_subcommand("infer", "Run a bundle over documents with the local model");
  infer->add_option("--bundle", ia.bundle, "Bundle file")->required();
  infer->add_option("--docs", ia.docs, "Directory of .txt files or a JSON-lines file")->required();
  infer->add_option("-o,--out", ia.out, "Predictions (JSON lines)")->required();
  infer->add_option("--summary", ia.summary, "Summary JSON (default: <out>.summary.json)");
  infer->add_option("--rounds", ia.rounds, "Inference rounds per document")->check(CLI::PositiveNumber);
  infer->add_flag("--revalidate", ia.revalidate, "Re-run synthetic validation before reading documents");
  infer->add_flag("--i-know-this-is-scripted", ia.scripted_ack, "Allow a configured cloud profile with scripted backends");

  EvaluateArgs ea;
  auto* evaluate = app.add_subcommand("evaluate", "Score predictions against ground truth");
  evaluate->add_option("--pred", ea.preds, "Predictions (JSON lines or CSV); repeatable")->required();
  evaluate->add_option("--gt", ea.gt, "Ground truth (CSV or JSON lines)")->required();
  evaluate->add_option("--labels", ea.labels, "Comma-separated labels in ordinal order");
  evaluate->add_option("--bundle", ea.bundle, "Take the label order from a bundle");
  evaluate->add_option("--json", ea.json_out, "Write the reports as JSON");
  evaluate->add_option("--csv-dir", ea.csv_dir, "Write confusion matrices as CSV");

  std::vector<std::string> argv_store;
  argv_store.push_back("orch");
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : argv_store) argv.push_back(s.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? kOk : kInvalidInput;
  }

  try {
    Ctx c{load_config(g, env), g.deterministic, out, err, env};
    if (*plan) return cmd_plan(c, pa);
    if (*validate) return cmd_validate(c, va);
    if (*pack) return cmd_pack(c, ka);
    if (*unpack) return cmd_unpack(c, ua);
    if (*infer) return cmd_infer(c, ia);
    if (*evaluate) return cmd_evaluate(c, ea);
  } catch (const CommandExit& e) {
    err << "orch: " << e.what() << "\n";
    return e.code;
  } catch (const Error& e) {
    err << "orch: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "orch: " << e.what() << "\n";
    return kOther;
  }
  return kOther;
}

}  // namespace orch::cli
