#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "wisflow/engine.hpp"
#include "wisflow/linker.hpp"
#include "wisflow/store.hpp"
#include "wisflow/values.hpp"

namespace wisflow {

struct HttpRequest {
  std::string method;
  std::string path;
  std::map<std::string, std::string> headers;  // lower-case names
  std::string body;
};

struct HttpResponse {
  int status = 200;
  Json body;  // null for an empty body
  std::map<std::string, std::string> headers;
};

struct ApiOptions {
  std::chrono::seconds session_ttl{8 * 3600};
};

class Api {
 public:
  struct Route {
    std::string method;
    std::string pattern;  // `{name}` matches one path segment
  };

  Api(const LinkedSystem& system, Store& store, ApiOptions options = {});

  /// The complete endpoint list, in matching order.
  static const std::vector<Route>& route_table();

  /// Dispatches one request. Never throws; internal failures become 500.
  HttpResponse handle(const HttpRequest& request);

 private:
  using Params = std::map<std::string, std::string>;
  struct Session {
    std::string user;
    std::chrono::system_clock::time_point expires;
  };

  HttpResponse dispatch(const HttpRequest& request);
  std::string require_user(const HttpRequest& request);
  std::string open_session(const std::string& user);

  HttpResponse login(const HttpRequest& request);
  HttpResponse menu(const std::string& user);
  HttpResponse tasks(const std::string& user);
  HttpResponse activities(const std::string& user);
  HttpResponse start(const std::string& user, const std::string& activity);
  HttpResponse get_action(const std::string& user, const std::string& action_id);
  HttpResponse post_action(const std::string& user, const std::string& action_id, const std::string& body);
  HttpResponse list_class(const std::string& user, const std::string& class_name);
  HttpResponse new_form(const std::string& user, const std::string& class_name);
  HttpResponse create(const std::string& user, const std::string& class_name, const std::string& body);
  HttpResponse detail(const std::string& user, const std::string& class_name, const std::string& id);
  HttpResponse update(const std::string& user, const std::string& class_name, const std::string& id,
                      const std::string& body);
  HttpResponse remove(const std::string& user, const std::string& class_name, const std::string& id);

  const ast::ClassDef& crud_class(const std::string& user, const std::string& class_name) const;

  const LinkedSystem* system_;
  Store* store_;
  Engine engine_;
  ApiOptions options_;
  std::mutex sessions_mutex_;
  std::map<std::string, Session> sessions_;
};

/// HTTP error carried to the dispatcher and rendered as
/// `{"error", "message", "fields"}`.
class ApiError : public std::runtime_error {
 public:
  ApiError(int status, std::string code, const std::string& message, std::map<std::string, std::string> fields = {})
      : std::runtime_error(message), status_(status), code_(std::move(code)), fields_(std::move(fields)) {}

  int status() const { return status_; }
  const std::string& code() const { return code_; }
  const std::map<std::string, std::string>& fields() const { return fields_; }

 private:
  int status_;
  std::string code_;
  std::map<std::string, std::string> fields_;
};

/// Socket front end for an Api.
class HttpServer {
 public:
  explicit HttpServer(Api& api);
  ~HttpServer();

  /// Binds the listening socket; false when the address is unavailable.
  /// Port 0 picks a free port.
  bool bind(const std::string& host, int port);
  int port() const { return port_; }
  /// Serves until `stop`.
  void run();
  /// Blocks until `run` accepts connections.
  void wait_until_ready();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  int port_ = 0;
};

/// `<instance>-<epoch>`, the id used in `/action/{id}` urls.
std::string action_id(const std::string& instance, std::uint64_t epoch);

}  // namespace wisflow
