#include "wisflow/printer.hpp"

#include <charconv>
#include <sstream>

namespace wisflow {

using namespace ast;

namespace {

template <class... Fs>
struct Overloaded : Fs... {
  using Fs::operator()...;
};
template <class... Fs>
Overloaded(Fs...) -> Overloaded<Fs...>;

std::string join(const std::vector<std::string>& items, std::string_view sep) {
  std::string out;
  for (size_t i = 0; i < items.size(); ++i) {
    if (i) out += sep;
    out += items[i];
  }
  return out;
}

std::string decl(const ParamDecl& d) { return to_string(d.type) + " " + d.name; }

std::string decl_list(const std::vector<ParamDecl>& decls) {
  std::vector<std::string> parts;
  for (const auto& d : decls) parts.push_back(decl(d));
  return join(parts, ", ");
}

std::string node_ref(const NodeRef& n) {
  switch (n.kind) {
    case NodeRef::Kind::Initial:
      return "initial";
    case NodeRef::Kind::Final:
      return "final";
    case NodeRef::Kind::Action:
      return n.pin ? n.action + "." + *n.pin : n.action;
  }
  return {};
}

std::string command(const Command& c) {
  return std::visit(Overloaded{
                        [](const LoadAll& x) { return x.assign_to + " = " + x.class_name + ".loadAll()"; },
                        [](const GetActualUser& x) { return x.assign_to + " = getActualUser()"; },
                        [](const AssignRole& x) { return "assignRole(" + x.partition + ", " + x.user + ")"; },
                        [](const SaveCmd& x) { return "save(" + x.target + ")"; },
                        [](const Notify& x) { return "notify(" + quote(x.message) + ")"; },
                    },
                    c);
}

std::string menu_entry(const MenuEntry& e) {
  return std::visit(Overloaded{
                        [](const PageEntry& x) { return "page " + x.page; },
                        [](const ActivityEntry& x) { return "activity " + x.activity; },
                        [](const ClassEntry& x) {
                          return "class " + x.class_name + (x.mode == CrudMode::List ? " list" : " create");
                        },
                    },
                    e);
}

int precedence(const GuardExpr& g) {
  switch (g.kind) {
    case GuardExpr::Kind::Or:
      return 1;
    case GuardExpr::Kind::And:
      return 2;
    case GuardExpr::Kind::Not:
      return 3;
    case GuardExpr::Kind::Equal:
    case GuardExpr::Kind::NotEqual:
      return 4;
    default:
      return 5;
  }
}

std::string wrap_if(bool cond, std::string s) { return cond ? "(" + s + ")" : s; }

}  // namespace

std::string quote(std::string_view text) {
  std::string out = "\"";
  for (char c : text) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      default: out += c;
    }
  }
  return out + "\"";
}

std::string print_literal(const Primitive& value) {
  return std::visit(Overloaded{
                        [](std::monostate) -> std::string { return "null"; },
                        [](bool b) -> std::string { return b ? "true" : "false"; },
                        [](std::int64_t i) { return std::to_string(i); },
                        [](double d) {
                          char buf[64];
                          auto res = std::to_chars(buf, buf + sizeof buf, d, std::chars_format::fixed);
                          std::string s(buf, res.ptr);
                          if (s.find('.') == std::string::npos) s += ".0";
                          return s;
                        },
                        [](const std::string& s) { return quote(s); },
                    },
                    value);
}

std::string print_guard(const GuardExpr& g) {
  const int prec = precedence(g);
  switch (g.kind) {
    case GuardExpr::Kind::Literal:
      return print_literal(g.literal);
    case GuardExpr::Kind::VarRef:
      return g.name;
    case GuardExpr::Kind::Getter:
      return g.name + ".get" + capitalize(g.attr) + "()";
    case GuardExpr::Kind::Equal:
    case GuardExpr::Kind::NotEqual:
      return wrap_if(precedence(g.operands[0]) <= prec, print_guard(g.operands[0])) +
             (g.kind == GuardExpr::Kind::Equal ? " == " : " != ") +
             wrap_if(precedence(g.operands[1]) <= prec, print_guard(g.operands[1]));
    case GuardExpr::Kind::Not:
      return "!" + wrap_if(precedence(g.operands[0]) < prec, print_guard(g.operands[0]));
    case GuardExpr::Kind::And:
    case GuardExpr::Kind::Or:
      return wrap_if(precedence(g.operands[0]) < prec, print_guard(g.operands[0])) +
             (g.kind == GuardExpr::Kind::And ? " && " : " || ") +
             wrap_if(precedence(g.operands[1]) <= prec, print_guard(g.operands[1]));
  }
  return {};
}

std::string print_expr(const Expr& e) {
  return std::visit(Overloaded{
                        [](const VarRef& x) { return x.name; },
                        [](const NewObject& x) { return "new " + x.class_name + "()"; },
                        [](const Getter& x) { return x.receiver + ".get" + capitalize(x.attr) + "()"; },
                        [](const FirstOf& x) { return x.receiver + ".iterator().next()"; },
                    },
                    e.node);
}

std::string print_script_stmt(const ScriptStmt& s) {
  return std::visit(Overloaded{
                        [](const Assign& x) { return x.lhs + " = " + print_expr(x.rhs) + ";"; },
                        [](const Invoke& x) {
                          return x.receiver + ".set" + capitalize(x.attr) + "(" + print_expr(x.arg) + ");";
                        },
                    },
                    s.node);
}

std::string pretty_print(const ClassModel& m) {
  std::ostringstream out;
  out << "classdiagram " << m.name << " {\n";
  for (const auto& c : m.classes) {
    out << "\n  class " << c.name << (c.is_user ? " <<user>>" : "") << " {\n";
    for (const auto& a : c.attributes) out << "    " << a.name << ": " << to_string(a.type) << ";\n";
    for (const auto& a : c.associations)
      out << "    -> " << a.role << ": " << a.target << (a.multiplicity == Multiplicity::One ? " one" : " many") << ";\n";
    out << "  }\n";
  }
  out << "}\n";
  return out.str();
}

std::string pretty_print(const ActivityModel& m) {
  std::ostringstream out;
  out << "activity " << m.name << " {\n";
  for (const auto& p : m.partitions) out << "\n  role " << p.name << " { " << join(p.actions, ", ") << " }\n";
  for (const auto& a : m.actions) {
    out << "\n  action " << a.name << " {\n";
    if (!a.in_pins.empty()) out << "    in : " << decl_list(a.in_pins) << ";\n";
    if (!a.out_pins.empty()) out << "    out : " << decl_list(a.out_pins) << ";\n";
    if (!a.vars.empty()) out << "    var : " << decl_list(a.vars) << ";\n";
    for (const auto& stmt : a.body) {
      std::visit(Overloaded{
                     [&](const CmdStmt& c) { out << "    cmd : " << command(c.command) << ";\n"; },
                     [&](const ViewStmt& v) { out << "    view : " << v.page << "(" << join(v.args, ", ") << ");\n"; },
                     [&](const ScriptBlock& b) {
                       out << "    java : {\n";
                       for (const auto& s : b.statements) out << "      " << print_script_stmt(s) << "\n";
                       out << "    }\n";
                     },
                 },
                 stmt);
    }
    out << "  }\n";
  }
  if (!m.edges.empty()) out << "\n";
  for (const auto& e : m.edges) {
    std::vector<std::string> targets;
    for (const auto& t : e.targets)
      targets.push_back(t.guard ? "[" + print_guard(*t.guard) + "] " + node_ref(t.node) : node_ref(t.node));
    out << "  " << node_ref(e.source) << " -> " << join(targets, " | ") << ";\n";
  }
  out << "}\n";
  return out.str();
}

std::string pretty_print(const PageModel& m) {
  std::ostringstream out;
  out << "page " << m.name << "(" << decl_list(m.params) << ") {\n";
  for (const auto& el : m.elements) {
    out << "  ";
    std::visit(Overloaded{
                   [&](const Heading& h) { out << "heading " << h.level << " " << quote(h.text) << ";"; },
                   [&](const Text& t) { out << "text " << quote(t.text) << ";"; },
                   [&](const Output& o) { out << "output " << o.param << (o.attr ? "." + *o.attr : "") << ";"; },
                   [&](const Input& i) { out << "input " << i.param << "." << i.attr << ";"; },
                   [&](const Table& t) {
                     out << "table " << t.param << (t.selectable ? " selectable" : "") << " { "
                         << join(t.columns, ", ") << " };";
                   },
               },
               el);
    out << "\n";
  }
  out << "}\n";
  return out.str();
}

std::string pretty_print(const AppModel& m) {
  std::ostringstream out;
  out << "application " << m.name << " {\n";
  if (!m.roles.empty()) out << "  roles " << join(m.roles, ", ") << ";\n";
  out << "  menu {\n";
  for (const auto& e : m.menu) out << "    " << menu_entry(e) << ";\n";
  out << "  }\n";
  for (const auto& r : m.rights) {
    out << "  rights " << r.role << " {\n";
    for (const auto& e : r.allowed) out << "    " << menu_entry(e) << ";\n";
    out << "  }\n";
  }
  out << "}\n";
  return out.str();
}

}  // namespace wisflow
