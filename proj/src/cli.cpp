#include "wisflow/cli.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <fstream>
#include <iostream>
#include <thread>

#include "wisflow/httpapi.hpp"
#include "wisflow/project.hpp"
#include "wisflow/scaffold.hpp"

namespace wisflow {

namespace fs = std::filesystem;

namespace {

constexpr const char* kSeedFile = "seed.json";
constexpr const char* kSeededMarker = ".seeded";

struct Loaded {
  int status = exit_code::kOk;
  std::optional<LinkedSystem> system;
};

Loaded load(const fs::path& dir, std::ostream& err) {
  std::vector<SourceFile> files;
  try {
    files = read_model_dir(dir);
  } catch (const ProjectIoError& e) {
    err << "error: " << e.what() << '\n';
    return {exit_code::kEnvironment, std::nullopt};
  }
  auto linked = load_project(files);
  for (const auto& d : linked.diagnostics) err << format_diagnostic(d) << '\n';
  if (!linked) return {exit_code::kModelErrors, std::nullopt};
  return {exit_code::kOk, std::move(linked.value)};
}

/// Loads the seed file once per data directory.
int seed(Store& store, const fs::path& model_dir, const fs::path& data_dir, std::ostream& out, std::ostream& err) {
  const auto marker = data_dir / kSeededMarker;
  const auto file = model_dir / kSeedFile;
  if (fs::exists(marker) || !fs::exists(file)) return exit_code::kOk;
  std::ifstream in(file);
  auto doc = Json::parse(in, nullptr, false);
  if (doc.is_discarded() || !doc.is_object() || !doc.contains("objects")) {
    err << file.string() << ": error: not a seed document\n";
    return exit_code::kModelErrors;
  }
  try {
    const auto n = load_seed(store, doc);
    out << "seeded " << n << " objects from " << file.string() << '\n';
  } catch (const std::exception& e) {
    err << file.string() << ": error: " << e.what() << '\n';
    return exit_code::kModelErrors;
  }
  std::ofstream(marker) << "seeded\n";
  return exit_code::kOk;
}

}  // namespace

int cmd_check(const fs::path& dir, std::ostream& err) { return load(dir, err).status; }

int cmd_init(const fs::path& dir, std::ostream& out, std::ostream& err) {
  std::error_code ec;
  if (fs::exists(dir, ec) && (!fs::is_directory(dir, ec) || !fs::is_empty(dir, ec))) {
    err << "error: " << dir.string() << " is not empty\n";
    return exit_code::kEnvironment;
  }
  fs::create_directories(dir, ec);
  if (ec) {
    err << "error: cannot create " << dir.string() << ": " << ec.message() << '\n';
    return exit_code::kEnvironment;
  }
  for (const auto& f : grade_thesis_fixture()) {
    std::ofstream file(dir / f.name);
    file << f.contents;
    if (!file) {
      err << "error: cannot write " << (dir / f.name).string() << '\n';
      return exit_code::kEnvironment;
    }
  }
  out << "created " << grade_thesis_fixture().size() << " files in " << dir.string() << '\n';
  return exit_code::kOk;
}

int cmd_serve(const ServeOptions& options, std::ostream& out, std::ostream& err) {
  auto loaded = load(options.model_dir, err);
  if (!loaded.system) return loaded.status;
  const auto data_dir = options.data_dir.value_or(options.model_dir / "data");

  std::unique_ptr<Store> store;
  try {
    store = std::make_unique<Store>(loaded.system->class_model(), StoreOptions{data_dir, std::nullopt, false});
  } catch (const StoreError& e) {
    err << "error: " << e.what() << '\n';
    return exit_code::kEnvironment;
  }
  Api api(*loaded.system, *store);
  HttpServer server(api);
  if (!server.bind(options.host, options.port)) {
    err << "error: cannot listen on " << options.host << ':' << options.port << '\n';
    return exit_code::kEnvironment;
  }
  if (int s = seed(*store, options.model_dir, data_dir, out, err); s != exit_code::kOk) return s;
  out << "listening on http://" << options.host << ':' << server.port() << std::endl;
  if (options.on_ready) options.on_ready(server);
  server.run();
  return exit_code::kOk;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Model-driven workflow applications", "wisflow"};
  app.require_subcommand(1);

  std::string check_dir;
  auto* check = app.add_subcommand("check", "Parse and link a model directory");
  check->add_option("dir", check_dir, "Model directory")->required();

  std::string init_dir;
  auto* init = app.add_subcommand("init", "Write the thesis-grading example project");
  init->add_option("dir", init_dir, "Target directory")->required();

  ServeOptions serve_options;
  std::string model_dir, data_dir;
  auto* serve = app.add_subcommand("serve", "Serve a model directory over HTTP");
  serve->add_option("dir", model_dir, "Model directory")->required();
  serve->add_option("--port", serve_options.port, "Listen port")->check(CLI::Range(0, 65535));
  serve->add_option("--host", serve_options.host, "Listen address");
  serve->add_option("--data", data_dir, "Data directory (default: <dir>/data)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? exit_code::kOk : exit_code::kEnvironment;
  }

  if (*check) return cmd_check(check_dir, err);
  if (*init) return cmd_init(init_dir, out, err);

  serve_options.model_dir = model_dir;
  if (!data_dir.empty()) serve_options.data_dir = data_dir;
  // SIGINT and SIGTERM are taken by a watcher thread that stops the server.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);
  serve_options.on_ready = [signals](HttpServer& server) {
    std::thread([signals, &server] {
      int sig = 0;
      sigwait(&signals, &sig);
      server.stop();
    }).detach();
  };
  return cmd_serve(serve_options, out, err);
}

}  // namespace wisflow
