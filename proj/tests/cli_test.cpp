#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "http_support.hpp"
#include "support.hpp"
#include "wisflow/cli.hpp"

namespace wisflow {
namespace {

namespace fs = std::filesystem;
using testing::Client;
using testing::Serving;
using testing::TempDir;

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path());
    std::stringstream text;
    text << in.rdbuf();
    out[fs::relative(e.path(), dir).string()] = text.str();
  }
  return out;
}

int cli(std::vector<std::string> args, std::string* out_text = nullptr, std::string* err_text = nullptr) {
  args.insert(args.begin(), "wisflow");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  if (out_text) *out_text = out.str();
  if (err_text) *err_text = err.str();
  return code;
}

TEST(Cli, InitThenCheck) {
  TempDir tmp;
  const auto dir = tmp.path() / "project";
  EXPECT_EQ(cli({"init", dir.string()}), 0);
  EXPECT_TRUE(fs::exists(dir / "GradeThesis.act"));
  EXPECT_TRUE(fs::exists(dir / "seed.json"));
  std::string err;
  const auto before = snapshot(dir);
  EXPECT_EQ(cli({"check", dir.string()}, nullptr, &err), 0);
  EXPECT_EQ(err, "");
  EXPECT_EQ(snapshot(dir), before);
  EXPECT_EQ(cli({"init", dir.string()}, nullptr, &err), 2);
  EXPECT_NE(err.find("not empty"), std::string::npos);
}

TEST(Cli, CheckReportsBrokenView) {
  TempDir tmp;
  ASSERT_EQ(cli({"init", tmp.path().string()}), 0);
  {
    std::ofstream act(tmp.path() / "GradeThesis.act");
    act << testing::replace_once(testing::fixture_text("GradeThesis.act"), "view : SetGrade1Page(i);",
                                 "view : SetGrade1Pag(i);");
  }
  std::string err;
  EXPECT_EQ(cli({"check", tmp.path().string()}, nullptr, &err), 1);
  EXPECT_NE(err.find("error[L003]"), std::string::npos) << err;
  EXPECT_EQ(std::count(err.begin(), err.end(), '\n'), 1) << err;
}

TEST(Cli, CheckEnvironmentErrors) {
  TempDir tmp;
  std::string err;
  EXPECT_EQ(cli({"check", tmp.path().string()}, nullptr, &err), 1);
  EXPECT_NE(err.find("no application model found"), std::string::npos);
  EXPECT_EQ(cli({"check", (tmp.path() / "missing").string()}, nullptr, &err), 2);
  EXPECT_EQ(cli({}, nullptr, &err), 2);
  EXPECT_EQ(cli({"frobnicate"}, nullptr, &err), 2);
  std::string out;
  EXPECT_EQ(cli({"--help"}, &out, &err), 0);
  EXPECT_NE(out.find("serve"), std::string::npos);
}

TEST(Cli, ServeSeedsOnceAndKeepsDataAcrossRestarts) {
  TempDir tmp;
  const auto models = tmp.path() / "models";
  ASSERT_EQ(cli({"init", models.string()}), 0);
  ServeOptions options{models, "127.0.0.1", 0, tmp.path() / "data", {}};
  {
    Serving serving(options);
    Client c(serving.port());
    ASSERT_EQ(c.login("ref1", "secret1").status, 200);
    EXPECT_EQ(c.get("/activities").body["activities"], Json::array({"GradeThesis"}));
    EXPECT_EQ(c.post("/class/Staff", {{"login", "ref3"}, {"password", "pw"}, {"role", "lecturer"}}).status, 201);
    EXPECT_EQ(c.get("/class/Staff").body["elements"][1]["rows"].size(), 3u);
    EXPECT_EQ(serving.finish(), 0);
    EXPECT_NE(serving.output().find("listening on http://127.0.0.1:"), std::string::npos);
  }
  {
    Serving serving(options);
    Client c(serving.port());
    ASSERT_EQ(c.login("ref3", "pw").status, 200);
    EXPECT_EQ(c.get("/class/Staff").body["elements"][1]["rows"].size(), 3u);
  }
}

TEST(Cli, ServeRefusesBusyPortAndBrokenModels) {
  TempDir tmp;
  const auto models = tmp.path() / "models";
  ASSERT_EQ(cli({"init", models.string()}), 0);
  Serving first({models, "127.0.0.1", 0, tmp.path() / "data", {}});
  std::ostringstream out, err;
  EXPECT_EQ(cmd_serve({models, "127.0.0.1", first.port(), tmp.path() / "data2", {}}, out, err), 2);
  EXPECT_NE(err.str().find("cannot listen"), std::string::npos);
  EXPECT_EQ(cli({"serve", models.string(), "--port", std::to_string(first.port()), "--data",
                 (tmp.path() / "data3").string()}),
            2);

  fs::remove(models / "ThesisManagement.app");
  EXPECT_EQ(cmd_serve({models, "127.0.0.1", 0, tmp.path() / "data4", {}}, out, err), 1);
}

}  // namespace
}  // namespace wisflow
