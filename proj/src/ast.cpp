#include "wisflow/ast.hpp"

#include <algorithm>
#include <array>
#include <cctype>

namespace wisflow::ast {

namespace {

constexpr std::array<std::pair<std::string_view, BuiltinType>, 7> kBuiltins{{
    {"String", BuiltinType::String},
    {"Text", BuiltinType::Text},
    {"Email", BuiltinType::Email},
    {"Date", BuiltinType::Date},
    {"Int", BuiltinType::Int},
    {"Decimal", BuiltinType::Decimal},
    {"Bool", BuiltinType::Bool},
}};

template <class Range, class Pred>
auto find_ptr(const Range& range, Pred pred) -> decltype(&*range.begin()) {
  auto it = std::find_if(range.begin(), range.end(), pred);
  return it == range.end() ? nullptr : &*it;
}

}  // namespace

std::string_view to_string(BuiltinType type) {
  for (const auto& [name, t] : kBuiltins)
    if (t == type) return name;
  return "String";
}

std::optional<BuiltinType> builtin_from_string(std::string_view name) {
  for (const auto& [n, t] : kBuiltins)
    if (n == name) return t;
  return std::nullopt;
}

std::string to_string(const TypeRef& type) {
  switch (type.kind) {
    case TypeRef::Kind::Class:
      return type.class_name;
    case TypeRef::Kind::SetOf:
      return "Set<" + type.class_name + ">";
    case TypeRef::Kind::Builtin:
      return std::string(to_string(type.builtin));
  }
  return {};
}

const AttributeDef* ClassDef::find_attribute(std::string_view attr) const {
  return find_ptr(attributes, [&](const AttributeDef& a) { return a.name == attr; });
}

const AssociationDef* ClassDef::find_association(std::string_view role) const {
  return find_ptr(associations, [&](const AssociationDef& a) { return a.role == role; });
}

const ClassDef* ClassModel::find(std::string_view class_name) const {
  return find_ptr(classes, [&](const ClassDef& c) { return c.name == class_name; });
}

const ViewStmt* ActionDef::view() const {
  for (const auto& stmt : body)
    if (const auto* v = std::get_if<ViewStmt>(&stmt)) return v;
  return nullptr;
}

const ParamDecl* ActionDef::find_in_pin(std::string_view pin) const {
  return find_ptr(in_pins, [&](const ParamDecl& p) { return p.name == pin; });
}

const ParamDecl* ActionDef::find_out_pin(std::string_view pin) const {
  return find_ptr(out_pins, [&](const ParamDecl& p) { return p.name == pin; });
}

const ParamDecl* ActionDef::find_decl(std::string_view decl_name) const {
  if (const auto* p = find_in_pin(decl_name)) return p;
  if (const auto* p = find_out_pin(decl_name)) return p;
  return find_ptr(vars, [&](const ParamDecl& p) { return p.name == decl_name; });
}

const ActionDef* ActivityModel::find_action(std::string_view action) const {
  return find_ptr(actions, [&](const ActionDef& a) { return a.name == action; });
}

const Partition* ActivityModel::find_partition(std::string_view partition) const {
  return find_ptr(partitions, [&](const Partition& p) { return p.name == partition; });
}

const Partition* ActivityModel::partition_of(std::string_view action) const {
  return find_ptr(partitions, [&](const Partition& p) {
    return std::find(p.actions.begin(), p.actions.end(), action) != p.actions.end();
  });
}

const EdgeDef* ActivityModel::initial_edge() const {
  return find_ptr(edges, [](const EdgeDef& e) { return e.source.kind == NodeRef::Kind::Initial; });
}

const EdgeDef* ActivityModel::outgoing(std::string_view action) const {
  return find_ptr(edges, [&](const EdgeDef& e) {
    return e.source.kind == NodeRef::Kind::Action && e.source.action == action;
  });
}

const ParamDecl* PageModel::find_param(std::string_view param) const {
  return find_ptr(params, [&](const ParamDecl& p) { return p.name == param; });
}

bool is_reserved_word(std::string_view word) {
  static constexpr std::array<std::string_view, 6> kReserved{"initial", "final", "true",
                                                             "false",   "null",  "new"};
  return std::find(kReserved.begin(), kReserved.end(), word) != kReserved.end();
}

std::string capitalize(std::string_view name) {
  std::string out(name);
  if (!out.empty()) out[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(out[0])));
  return out;
}

std::string decapitalize(std::string_view name) {
  std::string out(name);
  if (!out.empty()) out[0] = static_cast<char>(std::tolower(static_cast<unsigned char>(out[0])));
  return out;
}

}  // namespace wisflow::ast
