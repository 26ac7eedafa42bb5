#include "wisflow/httpapi.hpp"

#include <sys/socket.h>

#include <httplib.h>
#include <sodium.h>

#include <algorithm>
#include <sstream>

namespace wisflow {

namespace {

using namespace ast;

template <class... F>
struct Overload : F... {
  using F::operator()...;
};
template <class... F>
Overload(F...) -> Overload<F...>;

// User id of requests in models without any «user» class.
constexpr const char* kAnonymous = "anonymous";

std::vector<std::string> split_path(const std::string& path) {
  std::vector<std::string> out;
  std::stringstream in(path);
  std::string part;
  while (std::getline(in, part, '/'))
    if (!part.empty()) out.push_back(httplib::detail::decode_url(part, false));
  return out;
}

std::optional<std::map<std::string, std::string>> match(const std::string& pattern,
                                                        const std::vector<std::string>& segments) {
  const auto parts = split_path(pattern);
  if (parts.size() != segments.size()) return std::nullopt;
  std::map<std::string, std::string> params;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (parts[i].front() == '{') {
      params[parts[i].substr(1, parts[i].size() - 2)] = segments[i];
    } else if (parts[i] != segments[i]) {
      return std::nullopt;
    }
  }
  return params;
}

HttpResponse json(int status, Json body) { return {status, std::move(body), {}}; }

HttpResponse see_other(const std::string& location) {
  return {303, {{"location", location}}, {{"Location", location}}};
}

Json error_body(const std::string& code, const std::string& message, const std::map<std::string, std::string>& fields) {
  return {{"error", code}, {"message", message}, {"fields", fields}};
}

ApiError from_engine(const EngineError& e) {
  switch (e.kind()) {
    case EngineErrorKind::NotFound:
      return {404, "not-found", e.what()};
    case EngineErrorKind::Gone:
      return {410, "gone", e.what()};
    case EngineErrorKind::Forbidden:
      return {403, "forbidden", e.what()};
    case EngineErrorKind::WrongUser:
      return {403, "wrong-user", e.what()};
    case EngineErrorKind::Validation:
      return {422, "validation", e.what(), e.fields()};
    case EngineErrorKind::ActionFailed:
      return {422, "action-failed", e.what()};
    case EngineErrorKind::NotStartable:
      return {422, "not-startable", e.what()};
    case EngineErrorKind::Conflict:
      return {409, "conflict", e.what()};
    case EngineErrorKind::ScriptExhausted:
      break;
  }
  return {500, "internal", "internal error"};
}

ApiError from_store(const StoreError& e) {
  switch (e.kind()) {
    case StoreErrorKind::NotFound:
      return {404, "not-found", e.what()};
    case StoreErrorKind::Schema:
      return {422, "validation", e.what(), e.fields()};
    case StoreErrorKind::Conflict:
      return {409, "conflict", e.what()};
    case StoreErrorKind::AuthFailed:
      return {401, "unauthorized", e.what()};
    case StoreErrorKind::Io:
      break;
  }
  return {500, "internal", "storage failure"};
}

Json parse_body(const std::string& body) {
  if (body.empty()) return Json::object();
  auto doc = Json::parse(body, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) throw ApiError(400, "bad-request", "request body must be a JSON object");
  return doc;
}

bool hidden(const ClassDef& def, const std::string& attr) { return def.is_user && attr == "password"; }

Json object_json(const DomainObject& o, const ClassDef& def) {
  Json fields = Json::object();
  for (const auto& [k, v] : o.fields)
    if (!hidden(def, k)) fields[k] = primitive_to_json(v);
  return {{"id", o.id}, {"class", o.class_name}, {"fields", fields}, {"links", o.links}};
}

Json menu_entry_json(const MenuEntry& e) {
  return std::visit(Overload{
                        [](const PageEntry& p) { return Json{{"kind", "page"}, {"name", p.page}}; },
                        [](const ActivityEntry& a) {
                          return Json{{"kind", "activity"}, {"name", a.activity}, {"href", "/activity/" + a.activity}};
                        },
                        [](const ClassEntry& c) {
                          return Json{{"kind", "class"},
                                      {"name", c.class_name},
                                      {"mode", c.mode == CrudMode::List ? "list" : "create"},
                                      {"href", "/class/" + c.class_name + (c.mode == CrudMode::List ? "" : "/new")}};
                        },
                    },
                    e);
}

/// Text of a form value: strings as-is, other JSON scalars in JSON notation.
std::string form_text(const Json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); }

/// Converts a CRUD body into store arguments, collecting per-field errors.
void crud_values(const ClassDef& def, const Json& body, FieldValues& fields, LinkValues& links,
                 std::map<std::string, std::string>& errors) {
  for (const auto& [key, value] : body.items()) {
    if (const auto* attr = def.find_attribute(key)) {
      if (value.is_null()) {
        fields[key] = std::monostate{};
      } else if (value.is_string()) {
        auto parsed = parse_builtin_text(attr->type, value.get<std::string>());
        if (parsed) {
          fields[key] = *parsed;
        } else {
          Primitive raw = value.get<std::string>();
          auto msg = check_builtin(attr->type, raw);
          errors[key] = msg.empty() ? "expected " + std::string(to_string(attr->type)) : msg;
        }
      } else if (value.is_primitive()) {
        Primitive p = primitive_from_json(value);
        if (auto msg = check_builtin(attr->type, p); !msg.empty()) {
          errors[key] = msg;
        } else {
          fields[key] = p;
        }
      } else {
        errors[key] = "expected " + std::string(to_string(attr->type));
      }
    } else if (def.find_association(key)) {
      std::vector<std::string> ids;
      if (value.is_string()) {
        ids.push_back(value.get<std::string>());
      } else if (value.is_array() && std::all_of(value.begin(), value.end(), [](const Json& j) { return j.is_string(); })) {
        ids = value.get<std::vector<std::string>>();
      } else if (!value.is_null()) {
        errors[key] = "expected an object id or a list of ids";
        continue;
      }
      links[key] = ids;
    } else {
      errors[key] = "unknown field";
    }
  }
}

std::string type_label(const AttributeDef& a) { return std::string(to_string(a.type)); }

}  // namespace

std::string action_id(const std::string& instance, std::uint64_t epoch) { return instance + "-" + std::to_string(epoch); }

Api::Api(const LinkedSystem& system, Store& store, ApiOptions options)
    : system_(&system), store_(&store), engine_(system, store), options_(options) {
  if (sodium_init() < 0) throw std::runtime_error("libsodium failed to initialize");
}

const std::vector<Api::Route>& Api::route_table() {
  static const std::vector<Route> kRoutes{
      {"POST", "/login"},
      {"GET", "/menu"},
      {"GET", "/tasks"},
      {"GET", "/activities"},
      {"POST", "/activity/{name}"},
      {"GET", "/action/{id}"},
      {"POST", "/action/{id}"},
      {"GET", "/class/{class}"},
      {"POST", "/class/{class}"},
      {"GET", "/class/{class}/new"},
      {"GET", "/class/{class}/{id}"},
      {"PUT", "/class/{class}/{id}"},
      {"DELETE", "/class/{class}/{id}"},
  };
  return kRoutes;
}

HttpResponse Api::handle(const HttpRequest& request) {
  try {
    return dispatch(request);
  } catch (const ApiError& e) {
    return json(e.status(), error_body(e.code(), e.what(), e.fields()));
  } catch (const EngineError& e) {
    auto err = from_engine(e);
    return json(err.status(), error_body(err.code(), err.what(), err.fields()));
  } catch (const StoreError& e) {
    auto err = from_store(e);
    return json(err.status(), error_body(err.code(), err.what(), err.fields()));
  } catch (const std::exception&) {
    return json(500, error_body("internal", "internal error", {}));
  }
}

HttpResponse Api::dispatch(const HttpRequest& request) {
  const auto segments = split_path(request.path.substr(0, request.path.find('?')));
  bool path_known = false;
  for (const auto& route : route_table()) {
    auto params = match(route.pattern, segments);
    if (!params) continue;
    path_known = true;
    if (route.method != request.method) continue;
    const auto& p = route.pattern;
    if (p == "/login") return login(request);

    const auto user = require_user(request);
    if (p == "/menu") return menu(user);
    if (p == "/tasks") return tasks(user);
    if (p == "/activities") return activities(user);
    if (p == "/activity/{name}") return start(user, params->at("name"));
    if (p == "/action/{id}")
      return request.method == "GET" ? get_action(user, params->at("id"))
                                     : post_action(user, params->at("id"), request.body);
    if (p == "/class/{class}")
      return request.method == "GET" ? list_class(user, params->at("class"))
                                     : create(user, params->at("class"), request.body);
    if (p == "/class/{class}/new") return new_form(user, params->at("class"));
    if (p == "/class/{class}/{id}") {
      if (request.method == "GET") return detail(user, params->at("class"), params->at("id"));
      if (request.method == "PUT") return update(user, params->at("class"), params->at("id"), request.body);
      return remove(user, params->at("class"), params->at("id"));
    }
  }
  if (path_known) throw ApiError(405, "method-not-allowed", request.method + " is not supported on " + request.path);
  throw ApiError(404, "not-found", "no resource at " + request.path);
}

// ---------------------------------------------------------------- sessions

std::string Api::open_session(const std::string& user) {
  unsigned char raw[24];
  randombytes_buf(raw, sizeof raw);
  char hex[sizeof raw * 2 + 1];
  sodium_bin2hex(hex, sizeof hex, raw, sizeof raw);
  std::lock_guard lock(sessions_mutex_);
  sessions_[hex] = {user, std::chrono::system_clock::now() + options_.session_ttl};
  return hex;
}

std::string Api::require_user(const HttpRequest& request) {
  auto it = request.headers.find("authorization");
  const std::string prefix = "Bearer ";
  if (it == request.headers.end() || it->second.compare(0, prefix.size(), prefix) != 0) {
    if (!system_->has_user_classes()) return kAnonymous;
    throw ApiError(401, "unauthorized", "log in first");
  }
  const auto token = it->second.substr(prefix.size());
  std::lock_guard lock(sessions_mutex_);
  auto s = sessions_.find(token);
  if (s == sessions_.end()) throw ApiError(401, "unauthorized", "unknown session");
  if (s->second.expires <= std::chrono::system_clock::now()) {
    sessions_.erase(s);
    throw ApiError(401, "unauthorized", "session expired");
  }
  return s->second.user;
}

HttpResponse Api::login(const HttpRequest& request) {
  const auto body = parse_body(request.body);
  if (!body.contains("login") || !body["login"].is_string() || !body.contains("password") ||
      !body["password"].is_string())
    throw ApiError(400, "bad-request", "login and password are required");
  std::string user;
  try {
    user = store_->authenticate(body["login"].get<std::string>(), body["password"].get<std::string>());
  } catch (const StoreError&) {
    throw ApiError(401, "unauthorized", "wrong login or password");
  }
  const auto token = open_session(user);
  return json(200, {{"token", token}, {"user", user}, {"expiresIn", options_.session_ttl.count()}});
}

// ---------------------------------------------------------------- workflow

HttpResponse Api::menu(const std::string& user) {
  Json entries = Json::array();
  for (const auto& e : Access(*system_, *store_).menu_for(user)) entries.push_back(menu_entry_json(e));
  return json(200, {{"application", system_->app().name}, {"entries", entries}});
}

HttpResponse Api::tasks(const std::string& user) {
  Json list = Json::array();
  for (const auto& t : engine_.list_tasks(user)) {
    const auto id = action_id(t.instance, t.epoch);
    list.push_back({{"instance", t.instance},
                    {"activity", t.activity},
                    {"action", t.action},
                    {"actionId", id},
                    {"href", "/action/" + id}});
  }
  Json inbox = Json::array();
  for (const auto& m : store_->inbox(user))
    inbox.push_back({{"instance", m.instance}, {"activity", m.activity}, {"message", m.message}});
  return json(200, {{"tasks", list}, {"inbox", inbox}});
}

HttpResponse Api::activities(const std::string& user) {
  Access access(*system_, *store_);
  Json names = Json::array();
  for (const auto& [name, _] : system_->activities())
    if (access.may_start(user, name)) names.push_back(name);
  return json(200, {{"activities", names}});
}

HttpResponse Api::start(const std::string& user, const std::string& activity) {
  auto [ctx, next] = engine_.start_activity(activity, user);
  if (next.finished) return json(200, {{"status", "finished"}, {"instance", ctx.instance_id}});
  return see_other("/action/" + next.action_id());
}

namespace {

std::pair<std::string, std::uint64_t> split_action_id(const std::string& id) {
  const auto dash = id.rfind('-');
  if (dash == std::string::npos || dash == 0 || dash + 1 == id.size())
    throw ApiError(404, "not-found", "malformed action id '" + id + "'");
  const auto digits = id.substr(dash + 1);
  if (!std::all_of(digits.begin(), digits.end(), [](unsigned char c) { return std::isdigit(c); }) ||
      digits.size() > 18)
    throw ApiError(404, "not-found", "malformed action id '" + id + "'");
  return {id.substr(0, dash), std::stoull(digits)};
}

}  // namespace

HttpResponse Api::get_action(const std::string& user, const std::string& id) {
  const auto [instance, epoch] = split_action_id(id);
  auto page = engine_.render_action(instance, user, epoch);
  auto body = page.to_json();
  body["actionId"] = id;
  return json(200, body);
}

HttpResponse Api::post_action(const std::string& user, const std::string& id, const std::string& raw) {
  const auto [instance, epoch] = split_action_id(id);
  const auto body = parse_body(raw);
  Submission sub;
  for (const auto& [key, value] : body.items()) {
    if (!value.is_primitive() || value.is_null())
      throw ApiError(422, "validation", "form values must be scalars", {{key, "expected a value"}});
    if (key == "_decision") {
      sub.decision = form_text(value);
    } else if (key == "_selection") {
      sub.selection = form_text(value);
    } else {
      sub.form[key] = form_text(value);
    }
  }
  auto next = engine_.submit_action(instance, user, sub, epoch);
  if (next.finished) return json(200, {{"status", "finished"}, {"instance", instance}});
  return see_other("/action/" + next.action_id());
}

// ---------------------------------------------------------------- CRUD

const ClassDef& Api::crud_class(const std::string& user, const std::string& class_name) const {
  const auto* def = system_->find_class(class_name);
  if (!def) throw ApiError(404, "not-found", "no class '" + class_name + "'");
  if (!Access(*system_, *store_).may_use_class(user, class_name))
    throw ApiError(403, "forbidden", "no rights on class " + class_name);
  return *def;
}

HttpResponse Api::list_class(const std::string& user, const std::string& class_name) {
  const auto& def = crud_class(user, class_name);
  Json columns = Json::array();
  for (const auto& a : def.attributes)
    if (!hidden(def, a.name)) columns.push_back(a.name);
  Json rows = Json::array();
  for (const auto& o : store_->load_all(class_name)) {
    Json cells = Json::array();
    for (const auto& c : columns) {
      auto it = o.fields.find(c.get<std::string>());
      cells.push_back(it == o.fields.end() ? Json(nullptr) : primitive_to_json(it->second));
    }
    rows.push_back({{"id", o.id}, {"cells", cells}, {"links", o.links}, {"href", "/class/" + class_name + "/" + o.id}});
  }
  Json table{{"kind", "table"}, {"param", class_name}, {"selectable", false}, {"columns", columns}, {"rows", rows}};
  return json(200, {{"class", class_name},
                    {"page", class_name + " list"},
                    {"elements", Json::array({{{"kind", "heading"}, {"level", 1}, {"text", class_name}}, table})},
                    {"decisions", Json::array()},
                    {"fields", Json::object()}});
}

HttpResponse Api::new_form(const std::string& user, const std::string& class_name) {
  const auto& def = crud_class(user, class_name);
  Json elements = Json::array({{{"kind", "heading"}, {"level", 1}, {"text", "New " + class_name}}});
  Json fields = Json::object();
  for (const auto& a : def.attributes) {
    elements.push_back({{"kind", "input"},
                        {"param", class_name},
                        {"attr", a.name},
                        {"field", a.name},
                        {"type", type_label(a)},
                        {"value", nullptr},
                        {"editable", true}});
    fields[a.name] = type_label(a);
  }
  for (const auto& r : def.associations) {
    const auto type = r.multiplicity == Multiplicity::One ? r.target : "Set<" + r.target + ">";
    elements.push_back({{"kind", "input"},
                        {"param", class_name},
                        {"attr", r.role},
                        {"field", r.role},
                        {"type", type},
                        {"value", nullptr},
                        {"editable", true}});
    fields[r.role] = type;
  }
  return json(200, {{"class", class_name},
                    {"page", class_name + " new"},
                    {"elements", elements},
                    {"decisions", Json::array()},
                    {"fields", fields}});
}

HttpResponse Api::create(const std::string& user, const std::string& class_name, const std::string& raw) {
  const auto& def = crud_class(user, class_name);
  FieldValues fields;
  LinkValues links;
  std::map<std::string, std::string> errors;
  crud_values(def, parse_body(raw), fields, links, errors);
  if (!errors.empty()) throw ApiError(422, "validation", "invalid " + class_name, errors);
  const auto created = store_->create_object(class_name, std::move(fields), std::move(links));
  auto response = json(201, object_json(created, def));
  response.headers["Location"] = "/class/" + class_name + "/" + created.id;
  return response;
}

HttpResponse Api::detail(const std::string& user, const std::string& class_name, const std::string& id) {
  const auto& def = crud_class(user, class_name);
  return json(200, object_json(store_->load(class_name, id), def));
}

HttpResponse Api::update(const std::string& user, const std::string& class_name, const std::string& id,
                         const std::string& raw) {
  const auto& def = crud_class(user, class_name);
  FieldValues fields;
  LinkValues links;
  std::map<std::string, std::string> errors;
  crud_values(def, parse_body(raw), fields, links, errors);
  if (!errors.empty()) throw ApiError(422, "validation", "invalid " + class_name, errors);
  return json(200, object_json(store_->update(class_name, id, std::move(fields), std::move(links)), def));
}

HttpResponse Api::remove(const std::string& user, const std::string& class_name, const std::string& id) {
  crud_class(user, class_name);
  store_->remove(class_name, id);
  return json(200, {{"deleted", id}});
}

// ---------------------------------------------------------------- server

struct HttpServer::Impl {
  httplib::Server server;
};

HttpServer::HttpServer(Api& api) : impl_(std::make_unique<Impl>()) {
  auto handler = [&api](const httplib::Request& req, httplib::Response& res) {
    HttpRequest request{req.method, req.path, {}, req.body};
    for (const auto& [k, v] : req.headers) {
      std::string key = k;
      std::transform(key.begin(), key.end(), key.begin(), [](unsigned char c) { return std::tolower(c); });
      request.headers[key] = v;
    }
    // Plain HTML forms post url-encoded bodies; the api speaks JSON.
    if (req.get_header_value("Content-Type").rfind("application/x-www-form-urlencoded", 0) == 0 &&
        req.body.rfind("{", 0) != 0) {
      Json body = Json::object();
      for (const auto& [k, v] : req.params) body[k] = v;
      request.body = body.dump();
    }
    const auto response = api.handle(request);
    res.status = response.status;
    for (const auto& [k, v] : response.headers) res.set_header(k, v);
    if (!response.body.is_null()) res.set_content(response.body.dump(), "application/json");
  };
  auto& s = impl_->server;
  s.Get(".*", handler);
  s.Post(".*", handler);
  s.Put(".*", handler);
  s.Delete(".*", handler);
  s.Patch(".*", handler);
  s.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr) {
    res.status = 500;
    res.set_content(error_body("internal", "internal error", {}).dump(), "application/json");
  });
  // Without SO_REUSEPORT a second server on the same port fails to bind.
  s.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
  });
}

HttpServer::~HttpServer() { stop(); }

bool HttpServer::bind(const std::string& host, int port) {
  if (port == 0) {
    port_ = impl_->server.bind_to_any_port(host);
    return port_ > 0;
  }
  if (!impl_->server.bind_to_port(host, port)) return false;
  port_ = port;
  return true;
}

void HttpServer::run() { impl_->server.listen_after_bind(); }

void HttpServer::wait_until_ready() { impl_->server.wait_until_ready(); }

void HttpServer::stop() {
  if (impl_->server.is_running()) impl_->server.stop();
}

}  // namespace wisflow
