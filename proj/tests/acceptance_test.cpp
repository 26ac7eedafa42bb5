// One PASS/FAIL line per acceptance criterion. Exit status is non-zero when
// any criterion fails.

#include <chrono>
#include <fstream>
#include <functional>
#include <iostream>

#include "activity_gen.hpp"
#include "context_gen.hpp"
#include "generators.hpp"
#include "http_support.hpp"
#include "mutations.hpp"
#include "support.hpp"
#include "wisflow/engine.hpp"
#include "wisflow/parser.hpp"
#include "wisflow/printer.hpp"

namespace wisflow {
namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;
using testing::Client;
using testing::Serving;

// Pinned limits.
constexpr double kParseBudgetSeconds = 1.0;
constexpr double kScenarioBudgetSeconds = 5.0;
constexpr int kOracleActivities = 200;
constexpr int kPersistedContexts = 100;
constexpr int kGeneratedAsts = 500;

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok && pass) {
      pass = false;
      detail = what;
    }
  }
};

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt_seconds(double s) {
  std::ostringstream out;
  out.precision(3);
  out << std::fixed << s << "s";
  return out.str();
}

// ---------------------------------------------------------------------------

Outcome activity_text_fidelity() {
  Outcome o;
  const auto start = Clock::now();
  auto parsed = parse_activity(testing::fixture_text("GradeThesis.act"), "GradeThesis.act");
  const double took = seconds_since(start);
  o.require(bool(parsed), "fixture activity does not parse");
  if (!parsed) return o;
  const auto& a = *parsed;
  int initial = 0, decisions = 0, two_way = 0;
  for (const auto& e : a.edges) {
    initial += e.source.kind == ast::NodeRef::Kind::Initial;
    decisions += e.is_decision();
    two_way += e.is_decision() && e.targets.size() == 2;
  }
  const auto* assign = a.find_action("AssignRef2");
  o.require(a.partitions.size() == 2, "expected 2 partitions");
  o.require(a.actions.size() >= 5, "expected at least 5 actions");
  o.require(initial == 1, "expected 1 initial edge");
  o.require(decisions == 1 && two_way == 1, "expected 1 decision edge with 2 targets");
  o.require(assign && assign->out_pins.size() == 1 && assign->vars.size() == 3,
            "AssignRef2 needs 1 out-pin and 3 vars");
  o.require(took < kParseBudgetSeconds, "parse took " + fmt_seconds(took));
  if (o.pass)
    o.detail = std::to_string(a.partitions.size()) + " partitions, " + std::to_string(a.actions.size()) +
               " actions, parsed in " + fmt_seconds(took);
  return o;
}

// ---------------------------------------------------------------------------

std::string instance_of(const std::string& location) {
  const auto id = location.substr(std::string("/action/").size());
  return id.substr(0, id.rfind('-'));
}

Json read_json(const fs::path& p) {
  std::ifstream in(p);
  return Json::parse(in);
}

Outcome end_to_end_scenario() {
  Outcome o;
  const auto start = Clock::now();
  testing::TempDir tmp;
  const auto models = tmp.path() / "models";
  const auto data = tmp.path() / "data";
  std::ostringstream sink;
  o.require(cmd_init(models, sink, sink) == 0, "init failed");
  Serving server({models, "127.0.0.1", 0, data, {}});
  Client ref1(server.port()), ref2(server.port());
  auto l1 = ref1.login("ref1", "secret1");
  auto l2 = ref2.login("ref2", "secret2");
  o.require(l1.status == 200 && l2.status == 200, "login failed");
  if (!o.pass) return o;
  const auto id1 = l1.body["user"].get<std::string>();
  const auto id2 = l2.body["user"].get<std::string>();

  auto started = ref1.post("/activity/GradeThesis");
  o.require(started.status == 303, "start did not redirect");
  if (!o.pass) return o;
  const auto instance = instance_of(started.location);
  const auto context_file = data / "contexts" / (instance + ".json");
  // (a) starter bound to Referee1
  o.require(read_json(context_file)["roleBindings"] == Json{{"Referee1", id1}}, "(a) starter not bound to Referee1");

  auto select = ref1.get(started.location);
  o.require(select.status == 200 && select.body["page"] == "SelectSecondaryRef", "(b) AssignRef2 page missing");
  auto to_grade1 = ref1.post(started.location, {{"_selection", id2}});
  o.require(to_grade1.status == 303, "(b) AssignRef2 submission failed");
  // (b) Referee2 bound to the selected user
  o.require(read_json(context_file)["roleBindings"]["Referee2"] == id2, "(b) Referee2 not bound to selection");
  o.require(ref2.get("/tasks").body["tasks"].empty(), "(b) ref2 sees a task before the hand-over");
  o.require(ref1.get(to_grade1.location).status == 200, "(b) SetGrade1 page missing");
  auto to_grade2 = ref1.post(to_grade1.location, {{"thesis.title", "Type systems"}, {"thesis.grade1", "1.3"}});
  o.require(to_grade2.status == 303, "(b) SetGrade1 submission failed");
  const auto ref2_tasks = ref2.get("/tasks").body["tasks"];
  o.require(ref2_tasks.size() == 1 && ref2_tasks[0]["instance"] == instance && ref2_tasks[0]["action"] == "SetGrade2",
            "(b) task missing from ref2's list");
  o.require(ref1.get("/tasks").body["tasks"].empty(), "(b) task also in ref1's list");
  if (!o.pass) return o;

  // (c) Referee2's status sequence
  std::vector<int> seq;
  auto page = ref2.get(to_grade2.location);
  seq.push_back(page.status);
  auto submitted = ref2.post(to_grade2.location, {{"thesis.grade2", "1.7"}, {"_decision", "SaveAndNotify"}});
  seq.push_back(submitted.status);
  auto saved = ref2.get(submitted.location);
  seq.push_back(saved.status);
  auto done = ref2.post(submitted.location);
  seq.push_back(done.status);
  o.require(seq == std::vector<int>{200, 303, 200, 200}, "(c) status sequence differs");
  o.require(saved.body["page"] == "SavedPage", "(c) redirect does not lead to Saved");

  // (d) one ThesisData with both grades and both referees; one message each
  const auto theses = ref1.get("/class/ThesisData").body["elements"][1]["rows"];
  o.require(theses.size() == 1, "(d) expected exactly one ThesisData");
  if (theses.size() == 1) {
    const auto thesis = ref1.get("/class/ThesisData/" + theses[0]["id"].get<std::string>()).body;
    o.require(thesis["fields"]["grade1"] == 1.3 && thesis["fields"]["grade2"] == 1.7, "(d) grades not persisted");
    o.require(thesis["links"]["primaryRef"] == Json::array({id1}) && thesis["links"]["secondaryRef"] == Json::array({id2}),
              "(d) referee links wrong");
  }
  o.require(ref1.get("/tasks").body["inbox"].size() == 1 && ref2.get("/tasks").body["inbox"].size() == 1,
            "(d) expected one notification per participant");

  // (e) gone, and no context left on disk
  o.require(ref2.get(submitted.location).status == 410, "(e) completed instance not 410");
  o.require(!fs::exists(context_file) && fs::is_empty(data / "contexts"), "(e) context file remains");
  server.finish();
  const double took = seconds_since(start);
  o.require(took < kScenarioBudgetSeconds, "scenario took " + fmt_seconds(took));
  if (o.pass) o.detail = "GET 200 -> POST 303 -> GET 200 -> POST 200 in " + fmt_seconds(took);
  return o;
}

// ---------------------------------------------------------------------------

Outcome decision_semantics() {
  Outcome o;
  const auto system = testing::grade_thesis_system();
  auto store = testing::seeded_store(system);
  ChoiceScript s;
  s.starter = store->authenticate("ref1", "secret1");
  const auto ref2 = store->authenticate("ref2", "secret2");
  s.steps["AssignRef2"].selection = ref2;
  s.steps["SetGrade1"].form = {{"thesis.title", "T"}, {"thesis.grade1", "2.0"}};
  s.steps["SetGrade2"].form = {{"thesis.grade2", "2.3"}};
  s.decisions = {"Save"};
  const auto run = simulate(system, *store, "GradeThesis", s);
  const std::vector<std::string> expected{"AssignRef2", "SetGrade1", "SetGrade2", "Save", "Saved"};
  o.require(run.trace == expected, "trace differs");
  o.require(run.notifications.empty() && store->inbox(s.starter).empty() && store->inbox(ref2).empty(),
            "notifications emitted");
  o.require(store->load_all("ThesisData").size() == 1, "ThesisData not persisted");
  if (o.pass) o.detail = "trace [AssignRef2, SetGrade1, SetGrade2, Save, Saved], 0 notifications";
  return o;
}

// ---------------------------------------------------------------------------

Outcome oracle_equivalence() {
  Outcome o;
  std::mt19937_64 rng(20261016);
  int runs = 0, mismatches = 0, nodes_max = 0, decisions_max = 0;
  for (int i = 0; i < kOracleActivities; ++i) {
    const auto gen = testing::generate_activity(rng);
    nodes_max = std::max(nodes_max, static_cast<int>(gen.actions.size()) + 2);
    decisions_max = std::max(decisions_max, gen.decisions());
    auto linked = load_project(gen.sources());
    if (!linked) {
      o.require(false, "generated activity does not link: " + testing::dump(linked.diagnostics));
      return o;
    }
    for (const auto& path : testing::oracle_paths(gen)) {
      Store store(linked.value->class_model(), {std::nullopt, 1, true});
      ChoiceScript s;
      s.starter = "u";
      s.decisions.assign(path.labels.begin(), path.labels.end());
      ++runs;
      try {
        mismatches += simulate(*linked.value, store, "Gen", s).trace != path.trace;
      } catch (const std::exception&) {
        ++mismatches;
      }
    }
  }
  o.require(mismatches == 0, std::to_string(mismatches) + " mismatches in " + std::to_string(runs) + " runs");
  o.require(nodes_max <= 8 && decisions_max <= 2, "generator exceeded its bounds");
  if (o.pass)
    o.detail = std::to_string(kOracleActivities) + " activities, " + std::to_string(runs) + " label combinations, 0 mismatches";
  return o;
}

// ---------------------------------------------------------------------------

Outcome linker_mutations() {
  Outcome o;
  int exact = 0;
  for (const auto& m : testing::linker_mutations()) {
    const auto text = testing::replace_once(testing::fixture_text(m.file), m.from, m.to);
    auto linked = load_project(testing::fixture_sources({{m.file, text}}));
    const auto codes = testing::error_codes(linked.diagnostics);
    if (codes == std::vector<std::string>{m.code}) {
      ++exact;
    } else {
      o.require(false, m.code + " mutation yields: " + testing::dump(linked.diagnostics));
    }
  }
  o.require(testing::linker_mutations().size() == 10, "expected 10 mutations");
  if (o.pass) o.detail = std::to_string(exact) + "/10 mutations yield exactly their code";
  return o;
}

// ---------------------------------------------------------------------------

struct Snapshot {
  std::map<std::string, std::vector<DomainObject>> objects;
  std::vector<ExecutionContext> contexts;
  bool operator==(const Snapshot&) const = default;
};

Snapshot snapshot(const LinkedSystem& system, const fs::path& data) {
  Store store(system.class_model(), {data, std::nullopt, true});
  Snapshot s;
  for (const auto& c : system.class_model().classes) s.objects[c.name] = store.load_all(c.name);
  s.contexts = store.live_contexts();
  return s;
}

Outcome persistence_round_trip() {
  Outcome o;
  testing::TempDir tmp;
  // 100 random contexts survive a save and a reopen.
  {
    testing::ContextGenerator gen(99);
    std::vector<ExecutionContext> saved;
    {
      Store store(ast::ClassModel{}, {tmp.path() / "contexts-only", 3, true});
      for (int i = 0; i < kPersistedContexts; ++i) {
        auto ctx = gen.context();
        ctx.instance_id = store.new_instance_id();
        store.save_context(ctx);
        saved.push_back(ctx);
        o.require(store.load_context(ctx.instance_id) == ctx, "load(save(ctx)) differs in memory");
      }
    }
    Store reopened(ast::ClassModel{}, {tmp.path() / "contexts-only", 3, true});
    int equal = 0;
    for (const auto& ctx : saved) equal += reopened.load_context(ctx.instance_id) == ctx;
    o.require(equal == kPersistedContexts, std::to_string(equal) + "/100 contexts equal after reopen");
  }

  // A server restart keeps objects and a half-done instance resumable.
  const auto models = tmp.path() / "models";
  const auto data = tmp.path() / "data";
  std::ostringstream sink;
  cmd_init(models, sink, sink);
  auto linked = load_project(read_model_dir(models));
  ServeOptions options{models, "127.0.0.1", 0, data, {}};
  std::string location;
  {
    Serving server(options);
    Client ref1(server.port()), ref2(server.port());
    ref1.login("ref1", "secret1");
    const auto id2 = ref2.login("ref2", "secret2").body["user"].get<std::string>();
    ref1.post("/class/Staff", {{"login", "ref3"}, {"password", "pw"}, {"name", "Third"}, {"role", "lecturer"}});
    auto start = ref1.post("/activity/GradeThesis");
    ref1.get(start.location);
    auto next = ref1.post(start.location, {{"_selection", id2}});
    ref1.get(next.location);
    location = ref1.post(next.location, {{"thesis.title", "Lenses"}, {"thesis.grade1", "1.0"}}).location;
    o.require(ref2.get(location).status == 200, "SetGrade2 not reachable before restart");
  }
  const auto before = snapshot(*linked.value, data);
  o.require(before.contexts.size() == 1 &&
                before.contexts[0].token == TokenPosition{false, "SetGrade2", Phase::AwaitingSubmit},
            "expected one instance awaiting SetGrade2");
  o.require(before.objects.at("Staff").size() == 3, "expected 3 Staff before restart");
  {
    Serving server(options);
    Client ref2(server.port());
    ref2.login("ref2", "secret2");
    const auto tasks = ref2.get("/tasks").body["tasks"];
    o.require(tasks.size() == 1 && "/action/" + tasks[0]["actionId"].get<std::string>() == location,
              "task list changed across restart");
    auto page = ref2.get(location);
    o.require(page.status == 200 && page.body["action"] == "SetGrade2", "instance not resumable at SetGrade2");
  }
  o.require(snapshot(*linked.value, data) == before, "objects or contexts changed across restart");
  {
    Serving server(options);
    Client ref2(server.port());
    ref2.login("ref2", "secret2");
    auto done = ref2.post(location, {{"thesis.grade2", "1.3"}, {"_decision", "Save"}});
    o.require(done.status == 303 && ref2.post(done.location).status == 200, "resumed instance did not finish");
  }
  if (o.pass) o.detail = "100/100 contexts equal; restart resumed SetGrade2 in AwaitingSubmit";
  return o;
}

// ---------------------------------------------------------------------------

Outcome crud_from_class_model() {
  Outcome o;
  testing::TempDir tmp;
  {
    std::ofstream(tmp.path() / "Library.cd") << "classdiagram Library {\n"
                                                "  class Member { name: String; email: Email; joined: Date; }\n"
                                                "  class Loan { due: Date; fee: Decimal; returned: Bool; -> member: Member one; }\n"
                                                "}\n";
    std::ofstream(tmp.path() / "Library.app") << "application Library { }\n";
  }
  Serving server({tmp.path(), "127.0.0.1", 0, tmp.path() / "data", {}});
  Client c(server.port());
  std::map<std::string, Json> valid{
      {"Member", {{"name", "Ada"}, {"email", "ada@example.org"}, {"joined", "2024-02-29"}}},
      {"Loan", {{"due", "2024-03-01"}, {"fee", "1.5"}, {"returned", "false"}}}};
  std::map<std::string, std::string> member_id;
  int endpoints = 0;
  for (const auto& cls : {"Member", "Loan"}) {
    const std::string base = std::string("/class/") + cls;
    o.require(c.get(base + "/new").status == 200, std::string(cls) + ": create form missing");
    auto body = valid.at(cls);
    if (std::string(cls) == "Loan") body["member"] = member_id["Member"];
    auto made = c.post(base, body);
    o.require(made.status == 201, std::string(cls) + ": create failed " + made.body.dump());
    if (made.status != 201) return o;
    const auto id = made.body["id"].get<std::string>();
    member_id[cls] = id;
    o.require(c.get(base).body["elements"][1]["rows"].size() == 1, std::string(cls) + ": list failed");
    o.require(c.get(base + "/" + id).status == 200, std::string(cls) + ": detail failed");
    auto patch = std::string(cls) == "Member" ? Json{{"name", "Ada L."}} : Json{{"returned", true}};
    o.require(c.put(base + "/" + id, patch).status == 200, std::string(cls) + ": update failed");
    endpoints += 5;
  }
  auto bad_email = c.post("/class/Member", {{"name", "B"}, {"email", "b-at-example.org"}});
  o.require(bad_email.status == 422 && bad_email.body["fields"].contains("email"), "malformed Email accepted");
  auto bad_date = c.post("/class/Member", {{"name", "B"}, {"joined", "2023-02-29"}});
  o.require(bad_date.status == 422 && bad_date.body["fields"].contains("joined"), "malformed Date accepted");
  auto bad_due = c.put("/class/Loan/" + member_id["Loan"], {{"due", "01.03.2024"}});
  o.require(bad_due.status == 422 && bad_due.body["fields"].contains("due"), "malformed Date update accepted");
  for (const auto& cls : {"Loan", "Member"}) {
    const std::string url = std::string("/class/") + cls + "/" + member_id[cls];
    o.require(c.del(url).status == 200 && c.get(url).status == 404, std::string(cls) + ": delete failed");
  }
  if (o.pass) o.detail = std::to_string(endpoints + 2) + " CRUD calls over 2 classes, Email/Date rejected with 422";
  return o;
}

// ---------------------------------------------------------------------------

template <class Model, class Parse>
bool fixpoint(const Model& m, Parse parse) {
  const auto text = pretty_print(m);
  auto again = parse(text);
  return again && *again == m && pretty_print(*again) == text;
}

Outcome parser_round_trip() {
  Outcome o;
  int fixtures = 0;
  for (const auto& f : grade_thesis_fixture()) {
    const auto ext = fs::path(f.name).extension();
    bool ok = true;
    if (ext == ".cd") {
      auto m = parse_class_model(f.contents);
      ok = m && fixpoint(*m, [](auto& s) { return parse_class_model(s); });
    } else if (ext == ".act") {
      auto m = parse_activity(f.contents);
      ok = m && fixpoint(*m, [](auto& s) { return parse_activity(s); });
    } else if (ext == ".page") {
      auto m = parse_page(f.contents);
      ok = m && fixpoint(*m, [](auto& s) { return parse_page(s); });
    } else if (ext == ".app") {
      auto m = parse_app(f.contents);
      ok = m && fixpoint(*m, [](auto& s) { return parse_app(s); });
    } else {
      continue;
    }
    ++fixtures;
    o.require(ok, f.name + " is not a fixpoint");
  }
  testing::AstGenerator gen(500);
  int generated = 0;
  for (int i = 0; i < kGeneratedAsts; ++i) {
    bool ok = false;
    switch (i % 4) {
      case 0:
        ok = fixpoint(gen.class_model(), [](auto& s) { return parse_class_model(s); });
        break;
      case 1:
        ok = fixpoint(gen.activity(), [](auto& s) { return parse_activity(s); });
        break;
      case 2:
        ok = fixpoint(gen.page(), [](auto& s) { return parse_page(s); });
        break;
      default:
        ok = fixpoint(gen.app(), [](auto& s) { return parse_app(s); });
    }
    generated += ok;
  }
  o.require(generated == kGeneratedAsts, std::to_string(kGeneratedAsts - generated) + " generated ASTs not fixpoints");
  if (o.pass) o.detail = std::to_string(fixtures) + " fixtures and " + std::to_string(generated) + " generated ASTs";
  return o;
}

}  // namespace
}  // namespace wisflow

int main() {
  using namespace wisflow;
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"activity-text-fidelity", activity_text_fidelity},
      {"end-to-end-grading-scenario", end_to_end_scenario},
      {"decision-semantics", decision_semantics},
      {"oracle-equivalence", oracle_equivalence},
      {"linker-mutation-suite", linker_mutations},
      {"persistence-round-trip", persistence_round_trip},
      {"crud-from-class-model", crud_from_class_model},
      {"parser-round-trip", parser_round_trip},
  };
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    Outcome outcome;
    try {
      outcome = check();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    failed += !outcome.pass;
    std::cout << (outcome.pass ? "PASS " : "FAIL ") << name << ": " << outcome.detail << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
