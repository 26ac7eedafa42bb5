#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "wisflow/ast.hpp"

namespace wisflow {

using Json = nlohmann::json;

/// Persistent or transient instance of a class from the class model.
/// Unset attributes are absent from `fields`; roles without links are absent
/// from `links`.
struct DomainObject {
  std::string class_name;
  std::string id;
  std::map<std::string, ast::Primitive> fields;
  std::map<std::string, std::vector<std::string>> links;

  bool operator==(const DomainObject&) const = default;
};

/// Transient ids look like `tmp-7` and never collide with store ids, which
/// are five lowercase base-36 characters.
bool is_transient_id(std::string_view id);
std::string transient_id(std::uint64_t n);

struct ObjRef {
  std::string id;

  bool transient() const { return is_transient_id(id); }
  bool operator==(const ObjRef&) const = default;
};

struct ObjSet {
  std::vector<ObjRef> items;

  bool operator==(const ObjSet&) const = default;
};

/// Runtime value of a pin or variable. Null is `Primitive{monostate}`.
using Value = std::variant<ast::Primitive, ObjRef, ObjSet>;

bool is_null(const Value& v);

enum class Phase { BeforeView, AwaitingSubmit };

struct TokenPosition {
  bool completed = false;
  std::string action;
  Phase phase = Phase::BeforeView;

  bool operator==(const TokenPosition&) const = default;
};

struct Notification {
  std::string user;
  std::string message;

  bool operator==(const Notification&) const = default;
};

/// Durable state of one running activity instance. Bindings are keyed by
/// `Action.name` for pins and variables.
struct ExecutionContext {
  std::string instance_id;
  std::string activity;
  TokenPosition token;
  std::map<std::string, Value> bindings;
  std::map<std::string, std::string> role_bindings;
  std::map<std::string, DomainObject> transient_objects;
  std::string started_by;
  std::vector<Notification> notifications;
  std::uint64_t epoch = 0;      // bumped whenever the token enters an action
  std::uint64_t next_temp = 1;  // counter for transient ids

  bool operator==(const ExecutionContext&) const = default;
};

std::string binding_key(std::string_view action, std::string_view name);

Json primitive_to_json(const ast::Primitive& p);
/// Inverse of `primitive_to_json`; throws `std::invalid_argument` for arrays
/// and objects.
ast::Primitive primitive_from_json(const Json& j);

Json to_json(const Value& v);
Value value_from_json(const Json& j);

Json to_json(const DomainObject& o);
DomainObject object_from_json(const Json& j);

Json to_json(const ExecutionContext& ctx);
ExecutionContext context_from_json(const Json& j);

bool is_valid_email(std::string_view text);
/// ISO-8601 calendar date, `YYYY-MM-DD`.
bool is_valid_date(std::string_view text);

/// Checks `value` against a builtin type, widening Int to Decimal in place.
/// Returns an error message, or an empty string when the value conforms.
/// Null always conforms.
std::string check_builtin(ast::BuiltinType type, ast::Primitive& value);

/// Strict text-to-value conversion used for form input.
std::optional<ast::Primitive> parse_builtin_text(ast::BuiltinType type, std::string_view text);

}  // namespace wisflow
