#include <gtest/gtest.h>

#include <random>

#include "http_support.hpp"
#include "support.hpp"

namespace wisflow {
namespace {

using testing::Client;
using testing::structured_error;

class Http : public ::testing::Test {
 protected:
  LinkedSystem system = testing::grade_thesis_system();
  std::unique_ptr<Store> store = testing::seeded_store(system);
  Api api{system, *store};

  Client as(const std::string& login, const std::string& password) {
    Client c(api);
    EXPECT_EQ(c.login(login, password).status, 200);
    return c;
  }

  std::string guest() {
    store->create_object("Staff", {{"login", "guest"}, {"password", "pw"}, {"role", "guest"}});
    return "guest";
  }

  /// Drives an instance through AssignRef2 and SetGrade1 as ref1; returns the
  /// SetGrade2 location.
  std::string hand_over(Client& ref1) {
    auto start = ref1.post("/activity/GradeThesis");
    EXPECT_EQ(start.status, 303);
    auto page = ref1.get(start.location);
    const auto ref2_id = store->authenticate("ref2", "secret2");
    auto next = ref1.post(start.location, {{"_selection", ref2_id}});
    EXPECT_EQ(next.status, 303);
    EXPECT_EQ(ref1.get(next.location).status, 200);
    auto grade2 = ref1.post(next.location, {{"thesis.title", "Graph drawing"}, {"thesis.grade1", "1.7"}});
    EXPECT_EQ(grade2.status, 303);
    return grade2.location;
  }
};

TEST(RouteTable, ListsEveryEndpoint) {
  std::vector<std::string> routes;
  for (const auto& r : Api::route_table()) routes.push_back(r.method + " " + r.pattern);
  EXPECT_EQ(routes, (std::vector<std::string>{
                        "POST /login", "GET /menu", "GET /tasks", "GET /activities", "POST /activity/{name}",
                        "GET /action/{id}", "POST /action/{id}", "GET /class/{class}", "POST /class/{class}",
                        "GET /class/{class}/new", "GET /class/{class}/{id}", "PUT /class/{class}/{id}",
                        "DELETE /class/{class}/{id}"}));
}

TEST_F(Http, UnknownRoutesAndMethods) {
  Client anon(api);
  auto r = anon.get("/nonexistent");
  EXPECT_EQ(r.status, 404);
  EXPECT_TRUE(structured_error(r.body));
  r = anon.send("DELETE", "/menu", nullptr);
  EXPECT_EQ(r.status, 405);
  EXPECT_TRUE(structured_error(r.body));
}

TEST_F(Http, Sessions) {
  Client c(api);
  EXPECT_EQ(c.get("/menu").status, 401);
  EXPECT_EQ(c.login("ref1", "wrong").status, 401);
  EXPECT_EQ(c.login("nobody", "secret1").status, 401);
  EXPECT_EQ(c.post("/login", {{"login", "ref1"}}).status, 400);
  c.token = "forged";
  EXPECT_EQ(c.get("/menu").status, 401);
  ASSERT_EQ(c.login("ref1", "secret1").status, 200);
  EXPECT_EQ(c.get("/menu").status, 200);

  Api short_lived(system, *store, {std::chrono::seconds(0)});
  Client d(short_lived);
  ASSERT_EQ(d.login("ref1", "secret1").status, 200);
  auto r = d.get("/menu");
  EXPECT_EQ(r.status, 401);
  EXPECT_TRUE(structured_error(r.body));
}

TEST_F(Http, MenuAndActivitiesFollowRights) {
  auto ref1 = as("ref1", "secret1");
  auto menu = ref1.get("/menu");
  ASSERT_EQ(menu.status, 200);
  ASSERT_EQ(menu.body["entries"].size(), 3u);
  EXPECT_EQ(menu.body["entries"][0]["name"], "GradeThesis");
  EXPECT_EQ(ref1.get("/activities").body["activities"], Json::array({"GradeThesis"}));

  auto g = as(guest(), "pw");
  EXPECT_TRUE(g.get("/menu").body["entries"].empty());
  EXPECT_TRUE(g.get("/activities").body["activities"].empty());
  EXPECT_EQ(g.post("/activity/GradeThesis").status, 403);
  EXPECT_EQ(g.get("/class/Staff").status, 403);
}

TEST_F(Http, StartRedirectsToFirstAction) {
  Client anon(api);
  EXPECT_EQ(anon.post("/activity/GradeThesis").status, 401);
  auto ref1 = as("ref1", "secret1");
  auto r = ref1.post("/activity/Unknown");
  EXPECT_EQ(r.status, 404);
  EXPECT_TRUE(structured_error(r.body));
  r = ref1.post("/activity/GradeThesis");
  ASSERT_EQ(r.status, 303);
  EXPECT_EQ(r.location.rfind("/action/", 0), 0u);
  auto page = ref1.get(r.location);
  EXPECT_EQ(page.status, 200);
  EXPECT_EQ(page.body["page"], "SelectSecondaryRef");
  EXPECT_EQ(page.body["action"], "AssignRef2");
}

TEST_F(Http, RefereeTwoProtocol) {
  auto ref1 = as("ref1", "secret1");
  auto ref2 = as("ref2", "secret2");
  const auto set_grade2 = hand_over(ref1);

  auto tasks = ref2.get("/tasks");
  ASSERT_EQ(tasks.body["tasks"].size(), 1u);
  EXPECT_EQ("/action/" + tasks.body["tasks"][0]["actionId"].get<std::string>(), set_grade2);
  EXPECT_TRUE(ref1.get("/tasks").body["tasks"].empty());

  std::vector<int> statuses;
  auto page = ref2.get(set_grade2);
  statuses.push_back(page.status);
  EXPECT_EQ(page.body["decisions"], Json::array({"SaveAndNotify", "Save"}));
  EXPECT_EQ(page.body["fields"], Json({{"thesis.grade2", "Decimal"}}));
  auto post = ref2.post(set_grade2, {{"thesis.grade2", "2.3"}, {"_decision", "SaveAndNotify"}});
  statuses.push_back(post.status);
  auto saved = ref2.get(post.location);
  statuses.push_back(saved.status);
  EXPECT_EQ(saved.body["page"], "SavedPage");
  auto done = ref2.post(post.location);
  statuses.push_back(done.status);
  EXPECT_EQ(done.body["status"], "finished");
  EXPECT_EQ(statuses, (std::vector<int>{200, 303, 200, 200}));

  EXPECT_EQ(ref2.get(post.location).status, 410);
  EXPECT_EQ(ref2.get("/tasks").body["inbox"].size(), 1u);
  EXPECT_EQ(ref1.get("/tasks").body["inbox"].size(), 1u);
}

TEST_F(Http, WorkflowErrors) {
  auto ref1 = as("ref1", "secret1");
  auto ref2 = as("ref2", "secret2");
  const auto set_grade2 = hand_over(ref1);
  const auto instance = set_grade2.substr(std::string("/action/").size(), 5);

  auto r = ref1.get(set_grade2);
  EXPECT_EQ(r.status, 403);
  EXPECT_TRUE(structured_error(r.body));
  EXPECT_EQ(ref1.post(set_grade2, {{"thesis.grade2", "2.0"}, {"_decision", "Save"}}).status, 403);

  EXPECT_EQ(ref2.get(set_grade2).status, 200);
  const auto before = store->load_context(instance);
  r = ref2.post(set_grade2, {{"thesis.grade2", "abc"}, {"_decision", "Save"}});
  EXPECT_EQ(r.status, 422);
  EXPECT_TRUE(structured_error(r.body));
  EXPECT_TRUE(r.body["fields"].contains("thesis.grade2"));
  EXPECT_EQ(store->load_context(instance), before);
  EXPECT_EQ(store->load_context(instance).token.phase, Phase::AwaitingSubmit);

  r = ref2.post(set_grade2, {{"thesis.grade2", "2.0"}});
  EXPECT_EQ(r.status, 422);
  EXPECT_TRUE(r.body["fields"].contains("_decision"));

  {
    auto held = store->lock_instance(instance);
    r = ref2.post(set_grade2, {{"thesis.grade2", "2.0"}, {"_decision", "Save"}});
    EXPECT_EQ(r.status, 409);
    EXPECT_TRUE(structured_error(r.body));
  }

  r = ref2.post(set_grade2, {{"thesis.grade2", "2.0"}, {"_decision", "Save"}});
  ASSERT_EQ(r.status, 303);
  // The superseded step is gone, the new one is live.
  EXPECT_EQ(ref2.get(set_grade2).status, 410);
  EXPECT_EQ(ref2.post(set_grade2, {{"thesis.grade2", "2.0"}, {"_decision", "Save"}}).status, 410);
  EXPECT_EQ(ref2.get(r.location).status, 200);

  EXPECT_EQ(ref2.get("/action/zzzzz-1").status, 404);
  EXPECT_EQ(ref2.get("/action/garbage").status, 404);
}

TEST_F(Http, RepeatedGetIsIdempotent) {
  auto ref1 = as("ref1", "secret1");
  auto start = ref1.post("/activity/GradeThesis");
  auto first = ref1.get(start.location);
  const auto instance = first.body["instance"].get<std::string>();
  const auto ctx = store->load_context(instance);
  auto second = ref1.get(start.location);
  EXPECT_EQ(first.body, second.body);
  EXPECT_EQ(store->load_context(instance), ctx);
}

TEST_F(Http, CrudOnFixtureClasses) {
  auto ref1 = as("ref1", "secret1");
  auto list = ref1.get("/class/Staff");
  ASSERT_EQ(list.status, 200);
  const auto& table = list.body["elements"][1];
  EXPECT_EQ(table["columns"], Json::array({"login", "name", "email", "role"}));
  EXPECT_EQ(table["rows"].size(), 2u);

  auto form = ref1.get("/class/Staff/new");
  EXPECT_EQ(form.body["fields"]["email"], "Email");
  EXPECT_EQ(form.body["fields"]["password"], "String");

  auto bad = ref1.post("/class/Staff", {{"login", "c"}, {"password", "p"}, {"email", "not-an-address"}});
  EXPECT_EQ(bad.status, 422);
  EXPECT_TRUE(bad.body["fields"].contains("email"));
  EXPECT_EQ(ref1.post("/class/Staff", {{"login", "ref2"}, {"password", "p"}}).status, 422);
  EXPECT_EQ(ref1.post("/class/Staff", {{"shoeSize", "44"}}).status, 422);

  auto made = ref1.post("/class/Staff", {{"login", "c"}, {"password", "p"}, {"email", "c@example.org"}});
  ASSERT_EQ(made.status, 201);
  EXPECT_FALSE(made.body["fields"].contains("password"));
  const auto id = made.body["id"].get<std::string>();
  EXPECT_EQ(ref1.get("/class/Staff/" + id).body["fields"]["email"], "c@example.org");
  EXPECT_EQ(ref1.put("/class/Staff/" + id, {{"name", "Cleo"}}).body["fields"]["name"], "Cleo");
  EXPECT_EQ(ref1.get("/class/Staff/" + id).body["fields"]["login"], "c");
  EXPECT_EQ(ref1.del("/class/Staff/" + id).status, 200);
  EXPECT_EQ(ref1.get("/class/Staff/" + id).status, 404);
  EXPECT_EQ(ref1.get("/class/Nope").status, 404);
  // A ThesisData id is not a Staff id.
  auto thesis = ref1.post("/class/ThesisData", {{"title", "x"}});
  ASSERT_EQ(thesis.status, 201);
  EXPECT_EQ(ref1.get("/class/Staff/" + thesis.body["id"].get<std::string>()).status, 404);
  EXPECT_EQ(ref1.post("/class/ThesisData", {{"primaryRef", thesis.body["id"]}}).status, 422);
}

// ---- HTTP-vs-store oracle over a model without «user» classes

const char* kPeople =
    "classdiagram People {\n"
    "  class Person { name: String; email: Email; born: Date; score: Decimal; -> team: Team one; }\n"
    "  class Team { title: String; size: Int; -> members: Person many; }\n"
    "}\n";
const char* kPeopleApp = "application People { menu { class Person list; class Team list; } }\n";

TEST(HttpCrud, MatchesDirectStoreCalls) {
  auto linked = load_project({{"p.cd", kPeople}, {"p.app", kPeopleApp}});
  ASSERT_TRUE(linked) << testing::dump(linked.diagnostics);
  Store served(linked.value->class_model(), {std::nullopt, 11, true});
  Store direct(linked.value->class_model(), {std::nullopt, 11, true});
  Api api(*linked.value, served);
  Client http(api);

  std::mt19937_64 rng(5);
  auto pick = [&](std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); };
  std::vector<std::pair<std::string, std::string>> live;  // class, id
  int rejected = 0;
  for (int step = 0; step < 300; ++step) {
    const auto op = pick(4);
    if (op <= 1 || live.empty()) {
      const bool person = pick(2) == 0;
      const std::string cls = person ? "Person" : "Team";
      Json body;
      FieldValues fields;
      LinkValues links;
      const bool invalid = pick(5) == 0;
      if (person) {
        const auto n = std::to_string(step);
        body = {{"name", "p" + n}, {"email", invalid ? "p" + n + "-at-example" : "p" + n + "@example.org"},
                {"born", "1990-02-" + std::to_string(10 + pick(18))}, {"score", "2.5"}};
        fields = {{"name", "p" + n}, {"email", "p" + n + "@example.org"},
                  {"born", body["born"].get<std::string>()}, {"score", 2.5}};
      } else {
        body = {{"title", "t"}, {"size", invalid ? "3.5" : "3"}};
        fields = {{"title", "t"}, {"size", std::int64_t{3}}};
      }
      for (const auto& [c, id] : live)
        if (person && c == "Team" && pick(3) == 0) {
          body["team"] = id;
          links["team"] = {id};
          break;
        }
      auto r = http.post("/class/" + cls, body);
      if (invalid) {
        ASSERT_EQ(r.status, 422);
        ++rejected;
      } else {
        ASSERT_EQ(r.status, 201) << r.body.dump();
        const auto made = direct.create_object(cls, fields, links);
        ASSERT_EQ(r.body["id"], made.id);
        live.emplace_back(cls, made.id);
      }
    } else if (op == 2) {
      const auto [cls, id] = live[pick(live.size())];
      Json body = cls == "Person" ? Json{{"name", "renamed"}} : Json{{"size", 9}};
      FieldValues fields = cls == "Person" ? FieldValues{{"name", "renamed"}} : FieldValues{{"size", std::int64_t{9}}};
      ASSERT_EQ(http.put("/class/" + cls + "/" + id, body).status, 200);
      direct.update(cls, id, fields);
    } else {
      const auto at = pick(live.size());
      const auto [cls, id] = live[at];
      ASSERT_EQ(http.del("/class/" + cls + "/" + id).status, 200);
      direct.remove(cls, id);
      live.erase(live.begin() + static_cast<long>(at));
    }
    for (const auto* cls : {"Person", "Team"}) ASSERT_EQ(served.load_all(cls), direct.load_all(cls)) << step;
  }
  EXPECT_GT(rejected, 10);
  // Without «user» classes no login is needed.
  EXPECT_EQ(http.get("/class/Person").body["elements"][1]["rows"].size(), direct.load_all("Person").size());
}

TEST_F(Http, RealSocketsServeConcurrentClients) {
  testing::LiveServer server(api);
  std::vector<std::thread> threads;
  std::atomic<int> ok{0};
  for (int i = 0; i < 4; ++i) {
    threads.emplace_back([&] {
      Client c(server.port());
      if (c.login("ref1", "secret1").status != 200) return;
      auto start = c.post("/activity/GradeThesis");
      if (start.status == 303 && c.get(start.location).status == 200) ++ok;
    });
  }
  for (auto& t : threads) t.join();
  EXPECT_EQ(ok.load(), 4);
  EXPECT_EQ(store->live_contexts().size(), 4u);
  Client raw(server.port());
  auto r = raw.get("/nowhere");
  EXPECT_EQ(r.status, 404);
  EXPECT_TRUE(structured_error(r.body));
}

}  // namespace
}  // namespace wisflow
