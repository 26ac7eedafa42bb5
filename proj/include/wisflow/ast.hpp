#pragma once

// Abstract syntax for the four modeling languages (class, activity, page,
// application) and the action-script statements embedded in activities.
//
// Every node carries a `Loc`. Locations never take part in structural
// equality, so `parse(print(m)) == m` holds even though positions move.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace wisflow::ast {

struct Loc {
  int line = 0;
  int column = 0;

  friend bool operator==(const Loc&, const Loc&) { return true; }
};

/// A literal or runtime primitive. monostate is `null`.
using Primitive = std::variant<std::monostate, bool, std::int64_t, double, std::string>;

enum class BuiltinType { String, Text, Email, Date, Int, Decimal, Bool };

std::string_view to_string(BuiltinType type);
std::optional<BuiltinType> builtin_from_string(std::string_view name);

// ---------------------------------------------------------------------------
// Class models

struct AttributeDef {
  std::string name;
  BuiltinType type = BuiltinType::String;
  Loc loc;

  bool operator==(const AttributeDef&) const = default;
};

enum class Multiplicity { One, Many };

struct AssociationDef {
  std::string role;
  std::string target;
  Multiplicity multiplicity = Multiplicity::One;
  Loc loc;

  bool operator==(const AssociationDef&) const = default;
};

struct ClassDef {
  std::string name;
  bool is_user = false;
  std::vector<AttributeDef> attributes;
  std::vector<AssociationDef> associations;
  Loc loc;

  const AttributeDef* find_attribute(std::string_view attr) const;
  const AssociationDef* find_association(std::string_view role) const;

  bool operator==(const ClassDef&) const = default;
};

struct ClassModel {
  std::string name;
  std::vector<ClassDef> classes;
  Loc loc;

  const ClassDef* find(std::string_view class_name) const;

  bool operator==(const ClassModel&) const = default;
};

// ---------------------------------------------------------------------------
// Types used by pins, variables and page parameters

struct TypeRef {
  enum class Kind { Class, SetOf, Builtin };

  Kind kind = Kind::Class;
  std::string class_name;  // Class and SetOf
  BuiltinType builtin = BuiltinType::String;  // Builtin only

  static TypeRef of_class(std::string name) { return {Kind::Class, std::move(name), {}}; }
  static TypeRef set_of(std::string name) { return {Kind::SetOf, std::move(name), {}}; }
  static TypeRef of_builtin(BuiltinType type) { return {Kind::Builtin, {}, type}; }

  bool operator==(const TypeRef&) const = default;
};

std::string to_string(const TypeRef& type);

struct ParamDecl {
  TypeRef type;
  std::string name;
  Loc loc;

  bool operator==(const ParamDecl&) const = default;
};

// ---------------------------------------------------------------------------
// Action script

struct VarRef {
  std::string name;
  bool operator==(const VarRef&) const = default;
};
struct NewObject {
  std::string class_name;
  bool operator==(const NewObject&) const = default;
};
/// `receiver.getAttr()`; `attr` holds the attribute/role name (`attr`).
struct Getter {
  std::string receiver;
  std::string attr;
  bool operator==(const Getter&) const = default;
};
/// `receiver.iterator().next()`
struct FirstOf {
  std::string receiver;
  bool operator==(const FirstOf&) const = default;
};

struct Expr {
  std::variant<VarRef, NewObject, Getter, FirstOf> node;
  Loc loc;

  bool operator==(const Expr&) const = default;
};

struct Assign {
  std::string lhs;
  Expr rhs;
  bool operator==(const Assign&) const = default;
};
/// `receiver.setAttr(arg)`; a write to an attribute or association role.
struct Invoke {
  std::string receiver;
  std::string attr;
  Expr arg;
  bool operator==(const Invoke&) const = default;
};

struct ScriptStmt {
  std::variant<Assign, Invoke> node;
  Loc loc;

  bool operator==(const ScriptStmt&) const = default;
};

// ---------------------------------------------------------------------------
// Commands

struct LoadAll {
  std::string assign_to;
  std::string class_name;
  bool operator==(const LoadAll&) const = default;
};
struct GetActualUser {
  std::string assign_to;
  bool operator==(const GetActualUser&) const = default;
};
struct AssignRole {
  std::string partition;
  std::string user;
  bool operator==(const AssignRole&) const = default;
};
struct SaveCmd {
  std::string target;
  bool operator==(const SaveCmd&) const = default;
};
struct Notify {
  std::string message;
  bool operator==(const Notify&) const = default;
};

using Command = std::variant<LoadAll, GetActualUser, AssignRole, SaveCmd, Notify>;

struct CmdStmt {
  Command command;
  Loc loc;
  bool operator==(const CmdStmt&) const = default;
};

struct ViewStmt {
  std::string page;
  std::vector<std::string> args;
  Loc loc;
  bool operator==(const ViewStmt&) const = default;
};

struct ScriptBlock {
  std::vector<ScriptStmt> statements;
  Loc loc;
  bool operator==(const ScriptBlock&) const = default;
};

using Statement = std::variant<CmdStmt, ViewStmt, ScriptBlock>;

// ---------------------------------------------------------------------------
// Guards

struct GuardExpr {
  enum class Kind { Literal, VarRef, Getter, Equal, NotEqual, And, Or, Not };

  Kind kind = Kind::Literal;
  Primitive literal;
  std::string name;  // VarRef name or Getter receiver
  std::string attr;  // Getter attribute
  std::vector<GuardExpr> operands;
  Loc loc;

  bool operator==(const GuardExpr&) const = default;
};

// ---------------------------------------------------------------------------
// Activities

struct NodeRef {
  enum class Kind { Initial, Final, Action };

  Kind kind = Kind::Action;
  std::string action;
  std::optional<std::string> pin;
  Loc loc;

  static NodeRef initial() { return {Kind::Initial, {}, {}, {}}; }
  static NodeRef final_node() { return {Kind::Final, {}, {}, {}}; }
  static NodeRef to_action(std::string name, std::optional<std::string> pin = {}) {
    return {Kind::Action, std::move(name), std::move(pin), {}};
  }

  bool operator==(const NodeRef&) const = default;
};

struct EdgeTarget {
  NodeRef node;
  std::optional<GuardExpr> guard;
  bool operator==(const EdgeTarget&) const = default;
};

struct EdgeDef {
  NodeRef source;
  std::vector<EdgeTarget> targets;
  Loc loc;

  bool is_decision() const { return targets.size() > 1; }
  bool operator==(const EdgeDef&) const = default;
};

struct Partition {
  std::string name;
  std::vector<std::string> actions;
  Loc loc;
  bool operator==(const Partition&) const = default;
};

struct ActionDef {
  std::string name;
  std::vector<ParamDecl> in_pins;
  std::vector<ParamDecl> out_pins;
  std::vector<ParamDecl> vars;
  std::vector<Statement> body;
  Loc loc;

  const ViewStmt* view() const;
  bool is_interactive() const { return view() != nullptr; }
  /// Looks up a pin or var by name.
  const ParamDecl* find_decl(std::string_view decl_name) const;
  const ParamDecl* find_in_pin(std::string_view pin) const;
  const ParamDecl* find_out_pin(std::string_view pin) const;

  bool operator==(const ActionDef&) const = default;
};

struct ActivityModel {
  std::string name;
  std::vector<Partition> partitions;
  std::vector<ActionDef> actions;
  std::vector<EdgeDef> edges;
  Loc loc;

  const ActionDef* find_action(std::string_view action) const;
  const Partition* find_partition(std::string_view partition) const;
  const Partition* partition_of(std::string_view action) const;
  const EdgeDef* initial_edge() const;
  /// The single edge leaving `action`, if any.
  const EdgeDef* outgoing(std::string_view action) const;

  bool operator==(const ActivityModel&) const = default;
};

// ---------------------------------------------------------------------------
// Pages

struct Heading {
  int level = 1;
  std::string text;
  Loc loc;
  bool operator==(const Heading&) const = default;
};
struct Text {
  std::string text;
  Loc loc;
  bool operator==(const Text&) const = default;
};
struct Output {
  std::string param;
  std::optional<std::string> attr;
  Loc loc;
  bool operator==(const Output&) const = default;
};
struct Input {
  std::string param;
  std::string attr;
  Loc loc;
  bool operator==(const Input&) const = default;
};
struct Table {
  std::string param;
  bool selectable = false;
  std::vector<std::string> columns;
  Loc loc;
  bool operator==(const Table&) const = default;
};

using PageElement = std::variant<Heading, Text, Output, Input, Table>;

struct PageModel {
  std::string name;
  std::vector<ParamDecl> params;
  std::vector<PageElement> elements;
  Loc loc;

  const ParamDecl* find_param(std::string_view param) const;

  bool operator==(const PageModel&) const = default;
};

// ---------------------------------------------------------------------------
// Application

struct PageEntry {
  std::string page;
  Loc loc;
  bool operator==(const PageEntry&) const = default;
};
struct ActivityEntry {
  std::string activity;
  Loc loc;
  bool operator==(const ActivityEntry&) const = default;
};

enum class CrudMode { List, Create };

struct ClassEntry {
  std::string class_name;
  CrudMode mode = CrudMode::List;
  Loc loc;
  bool operator==(const ClassEntry&) const = default;
};

using MenuEntry = std::variant<PageEntry, ActivityEntry, ClassEntry>;

struct RightRule {
  std::string role;
  std::vector<MenuEntry> allowed;
  Loc loc;
  bool operator==(const RightRule&) const = default;
};

struct AppModel {
  std::string name;
  std::vector<std::string> roles;
  std::vector<MenuEntry> menu;
  std::vector<RightRule> rights;
  Loc loc;

  bool operator==(const AppModel&) const = default;
};

/// Identifiers with fixed meaning in some position of the grammar. They are
/// rejected as declared names.
bool is_reserved_word(std::string_view word);

/// `grade1` -> `Grade1`, used for getter/setter spelling.
std::string capitalize(std::string_view name);
std::string decapitalize(std::string_view name);

}  // namespace wisflow::ast
