#include "wisflow/values.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <regex>
#include <stdexcept>

namespace wisflow {

namespace {

constexpr std::string_view kTransientPrefix = "tmp-";

template <class... F>
struct Overload : F... {
  using F::operator()...;
};
template <class... F>
Overload(F...) -> Overload<F...>;

Json ref_to_json(const ObjRef& r) { return r.id; }

}  // namespace

bool is_transient_id(std::string_view id) { return id.substr(0, kTransientPrefix.size()) == kTransientPrefix; }

std::string transient_id(std::uint64_t n) { return std::string(kTransientPrefix) + std::to_string(n); }

bool is_null(const Value& v) {
  const auto* p = std::get_if<ast::Primitive>(&v);
  return p && std::holds_alternative<std::monostate>(*p);
}

std::string binding_key(std::string_view action, std::string_view name) {
  std::string key(action);
  key += '.';
  key += name;
  return key;
}

Json primitive_to_json(const ast::Primitive& p) {
  return std::visit(Overload{
                        [](std::monostate) { return Json(nullptr); },
                        [](bool b) { return Json(b); },
                        [](std::int64_t i) { return Json(i); },
                        [](double d) { return Json(d); },
                        [](const std::string& s) { return Json(s); },
                    },
                    p);
}

ast::Primitive primitive_from_json(const Json& j) {
  switch (j.type()) {
    case Json::value_t::null:
      return std::monostate{};
    case Json::value_t::boolean:
      return j.get<bool>();
    case Json::value_t::number_integer:
    case Json::value_t::number_unsigned:
      return j.get<std::int64_t>();
    case Json::value_t::number_float:
      return j.get<double>();
    case Json::value_t::string:
      return j.get<std::string>();
    default:
      throw std::invalid_argument("expected a primitive JSON value");
  }
}

// Values are tagged so that a string primitive never reads back as a ref.
Json to_json(const Value& v) {
  return std::visit(Overload{
                        [](const ast::Primitive& p) { return Json{{"prim", primitive_to_json(p)}}; },
                        [](const ObjRef& r) { return Json{{"ref", ref_to_json(r)}}; },
                        [](const ObjSet& s) {
                          Json items = Json::array();
                          for (const auto& r : s.items) items.push_back(ref_to_json(r));
                          return Json{{"set", items}};
                        },
                    },
                    v);
}

Value value_from_json(const Json& j) {
  if (j.contains("prim")) return primitive_from_json(j.at("prim"));
  if (j.contains("ref")) return ObjRef{j.at("ref").get<std::string>()};
  if (j.contains("set")) {
    ObjSet set;
    for (const auto& item : j.at("set")) set.items.push_back({item.get<std::string>()});
    return set;
  }
  throw std::invalid_argument("untagged value");
}

Json to_json(const DomainObject& o) {
  Json fields = Json::object();
  for (const auto& [k, v] : o.fields) fields[k] = primitive_to_json(v);
  Json links = Json::object();
  for (const auto& [k, ids] : o.links) links[k] = ids;
  return {{"className", o.class_name}, {"id", o.id}, {"fields", fields}, {"links", links}};
}

DomainObject object_from_json(const Json& j) {
  DomainObject o;
  o.class_name = j.at("className").get<std::string>();
  o.id = j.at("id").get<std::string>();
  for (const auto& [k, v] : j.at("fields").items()) o.fields[k] = primitive_from_json(v);
  for (const auto& [k, v] : j.at("links").items()) o.links[k] = v.get<std::vector<std::string>>();
  return o;
}

Json to_json(const ExecutionContext& ctx) {
  Json token;
  if (ctx.token.completed) {
    token = {{"completed", true}};
  } else {
    token = {{"action", ctx.token.action},
             {"phase", ctx.token.phase == Phase::BeforeView ? "BeforeView" : "AwaitingSubmit"}};
  }
  Json bindings = Json::object();
  for (const auto& [k, v] : ctx.bindings) bindings[k] = to_json(v);
  Json transients = Json::object();
  for (const auto& [k, o] : ctx.transient_objects) transients[k] = to_json(o);
  Json notes = Json::array();
  for (const auto& n : ctx.notifications) notes.push_back({{"user", n.user}, {"message", n.message}});
  return {{"instanceId", ctx.instance_id},
          {"activityName", ctx.activity},
          {"token", token},
          {"bindings", bindings},
          {"roleBindings", ctx.role_bindings},
          {"transientObjects", transients},
          {"startedBy", ctx.started_by},
          {"notifications", notes},
          {"epoch", ctx.epoch},
          {"nextTemp", ctx.next_temp}};
}

ExecutionContext context_from_json(const Json& j) {
  ExecutionContext ctx;
  ctx.instance_id = j.at("instanceId").get<std::string>();
  ctx.activity = j.at("activityName").get<std::string>();
  const Json& token = j.at("token");
  if (token.value("completed", false)) {
    ctx.token.completed = true;
  } else {
    ctx.token.action = token.at("action").get<std::string>();
    const auto phase = token.at("phase").get<std::string>();
    if (phase == "BeforeView") {
      ctx.token.phase = Phase::BeforeView;
    } else if (phase == "AwaitingSubmit") {
      ctx.token.phase = Phase::AwaitingSubmit;
    } else {
      throw std::invalid_argument("unknown token phase '" + phase + "'");
    }
  }
  for (const auto& [k, v] : j.at("bindings").items()) ctx.bindings[k] = value_from_json(v);
  ctx.role_bindings = j.at("roleBindings").get<std::map<std::string, std::string>>();
  for (const auto& [k, v] : j.at("transientObjects").items()) ctx.transient_objects[k] = object_from_json(v);
  ctx.started_by = j.at("startedBy").get<std::string>();
  for (const auto& n : j.at("notifications"))
    ctx.notifications.push_back({n.at("user").get<std::string>(), n.at("message").get<std::string>()});
  ctx.epoch = j.at("epoch").get<std::uint64_t>();
  ctx.next_temp = j.at("nextTemp").get<std::uint64_t>();
  return ctx;
}

bool is_valid_email(std::string_view text) {
  static const std::regex kEmail(R"([^@\s]+@[^@\s.]+(\.[^@\s.]+)+)");
  return std::regex_match(text.begin(), text.end(), kEmail);
}

bool is_valid_date(std::string_view text) {
  static const std::regex kDate(R"((\d{4})-(\d{2})-(\d{2}))");
  std::match_results<std::string_view::const_iterator> m;
  if (!std::regex_match(text.begin(), text.end(), m, kDate)) return false;
  const std::chrono::year_month_day ymd{std::chrono::year(std::stoi(m[1].str())),
                                        std::chrono::month(static_cast<unsigned>(std::stoi(m[2].str()))),
                                        std::chrono::day(static_cast<unsigned>(std::stoi(m[3].str())))};
  return ymd.ok();
}

std::string check_builtin(ast::BuiltinType type, ast::Primitive& value) {
  using ast::BuiltinType;
  if (std::holds_alternative<std::monostate>(value)) return {};
  const std::string expected = "expected " + std::string(ast::to_string(type));
  switch (type) {
    case BuiltinType::String:
    case BuiltinType::Text:
      return std::holds_alternative<std::string>(value) ? "" : expected;
    case BuiltinType::Email: {
      const auto* s = std::get_if<std::string>(&value);
      if (!s) return expected;
      return is_valid_email(*s) ? "" : "malformed email address";
    }
    case BuiltinType::Date: {
      const auto* s = std::get_if<std::string>(&value);
      if (!s) return expected;
      return is_valid_date(*s) ? "" : "malformed date, expected YYYY-MM-DD";
    }
    case BuiltinType::Int:
      return std::holds_alternative<std::int64_t>(value) ? "" : expected;
    case BuiltinType::Decimal:
      if (const auto* i = std::get_if<std::int64_t>(&value)) value = static_cast<double>(*i);
      if (const auto* d = std::get_if<double>(&value)) return std::isfinite(*d) ? "" : expected;
      return expected;
    case BuiltinType::Bool:
      return std::holds_alternative<bool>(value) ? "" : expected;
  }
  return expected;
}

std::optional<ast::Primitive> parse_builtin_text(ast::BuiltinType type, std::string_view text) {
  using ast::BuiltinType;
  switch (type) {
    case BuiltinType::String:
    case BuiltinType::Text:
      return std::string(text);
    case BuiltinType::Email:
      if (is_valid_email(text)) return std::string(text);
      return std::nullopt;
    case BuiltinType::Date:
      if (is_valid_date(text)) return std::string(text);
      return std::nullopt;
    case BuiltinType::Int: {
      std::int64_t v = 0;
      auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
      if (ec != std::errc() || end != text.data() + text.size() || text.empty()) return std::nullopt;
      return v;
    }
    case BuiltinType::Decimal: {
      static const std::regex kDecimal(R"(-?\d+(\.\d+)?)");
      if (!std::regex_match(text.begin(), text.end(), kDecimal)) return std::nullopt;
      double v = 0;
      auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
      if (ec != std::errc() || end != text.data() + text.size() || !std::isfinite(v)) return std::nullopt;
      return v;
    }
    case BuiltinType::Bool:
      if (text == "true") return true;
      if (text == "false") return false;
      return std::nullopt;
  }
  return std::nullopt;
}

}  // namespace wisflow
