#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>

namespace wisflow {

class HttpServer;

namespace exit_code {
inline constexpr int kOk = 0;
inline constexpr int kModelErrors = 1;
inline constexpr int kEnvironment = 2;
}  // namespace exit_code

/// Parses and links every model file in `dir`; diagnostics go to `err`.
int cmd_check(const std::filesystem::path& dir, std::ostream& err);

/// Writes the thesis-grading example project into an empty or new directory.
int cmd_init(const std::filesystem::path& dir, std::ostream& out, std::ostream& err);

struct ServeOptions {
  std::filesystem::path model_dir;
  std::string host = "127.0.0.1";
  int port = 8080;                               // 0 picks a free port
  std::optional<std::filesystem::path> data_dir;  // default: <model_dir>/data
  /// Called once the socket is bound and before serving starts. The server
  /// stays valid until `cmd_serve` returns; call `stop` on it to shut down.
  std::function<void(HttpServer&)> on_ready;
};

/// Serves the model directory over HTTP until the server is stopped.
/// Loads `seed.json` from the model directory into an empty data directory.
int cmd_serve(const ServeOptions& options, std::ostream& out, std::ostream& err);

/// Entry point shared by the executable and the tests.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace wisflow
