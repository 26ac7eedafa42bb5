#include "wisflow/linker.hpp"

#include <deque>
#include <functional>

namespace wisflow {

using namespace ast;
namespace codes = link_codes;

namespace {

template <class... Fs>
struct Overloaded : Fs... {
  using Fs::operator()...;
};
template <class... Fs>
Overloaded(Fs...) -> Overloaded<Fs...>;

// Static type of a name or expression during checking. Unknown stands for a
// type that already failed to resolve; it is compatible with everything so a
// single broken reference yields a single diagnostic.
struct Ty {
  enum class Kind { Unknown, Class, SetOf, Builtin };
  Kind kind = Kind::Unknown;
  std::string cls;
  BuiltinType builtin = BuiltinType::String;

  static Ty unknown() { return {}; }
  static Ty of_class(std::string c) { return {Kind::Class, std::move(c), {}}; }
  static Ty set_of(std::string c) { return {Kind::SetOf, std::move(c), {}}; }
  static Ty of_builtin(BuiltinType b) { return {Kind::Builtin, {}, b}; }

  bool is_unknown() const { return kind == Kind::Unknown; }
  bool compatible(const Ty& o) const {
    if (is_unknown() || o.is_unknown()) return true;
    if (kind != o.kind) return false;
    return kind == Kind::Builtin ? builtin == o.builtin : cls == o.cls;
  }
  std::string str() const {
    switch (kind) {
      case Kind::Unknown: return "<unresolved>";
      case Kind::Class: return cls;
      case Kind::SetOf: return "Set<" + cls + ">";
      case Kind::Builtin: return std::string(to_string(builtin));
    }
    return {};
  }
};

class Linker {
 public:
  explicit Linker(const ModelSet& m) : m_(m) {}

  std::vector<Diagnostic> run() {
    check_classes();
    for (const auto& p : m_.pages) check_page(p);
    for (const auto& a : m_.activities) check_activity(a);
    check_app();
    return std::move(out_);
  }

 private:
  void report(Severity sev, const std::string& file, const Loc& at, const char* code, std::string msg) {
    out_.push_back({sev, {file, at.line, at.column}, code, std::move(msg)});
  }
  void error(const std::string& file, const Loc& at, const char* code, std::string msg) {
    report(Severity::Error, file, at, code, std::move(msg));
  }
  void warn(const std::string& file, const Loc& at, const char* code, std::string msg) {
    report(Severity::Warning, file, at, code, std::move(msg));
  }

  const ClassModel& classes() const { return m_.classes.model; }

  const PageModel* find_page(std::string_view name) const {
    for (const auto& p : m_.pages)
      if (p.model.name == name) return &p.model;
    return nullptr;
  }

  Ty resolve(const TypeRef& t, const std::string& file, const Loc& at) {
    switch (t.kind) {
      case TypeRef::Kind::Builtin:
        return Ty::of_builtin(t.builtin);
      case TypeRef::Kind::Class:
      case TypeRef::Kind::SetOf:
        if (!classes().find(t.class_name)) {
          error(file, at, codes::kUnknownType, "type '" + to_string(t) + "' refers to undeclared class '" + t.class_name + "'");
          return Ty::unknown();
        }
        return t.kind == TypeRef::Kind::Class ? Ty::of_class(t.class_name) : Ty::set_of(t.class_name);
    }
    return Ty::unknown();
  }

  /// Type of `receiver.attr` on a class, or nullopt when no such member.
  std::optional<Ty> member_type(const std::string& cls_name, const std::string& attr) const {
    const ClassDef* cls = classes().find(cls_name);
    if (!cls) return Ty::unknown();
    if (const auto* a = cls->find_attribute(attr)) return Ty::of_builtin(a->type);
    if (const auto* r = cls->find_association(attr))
      return r->multiplicity == Multiplicity::One ? Ty::of_class(r->target) : Ty::set_of(r->target);
    return std::nullopt;
  }

  bool is_user_class(const Ty& t) const {
    if (t.is_unknown()) return true;
    if (t.kind != Ty::Kind::Class) return false;
    const ClassDef* c = classes().find(t.cls);
    return c && c->is_user;
  }

  // -------------------------------------------------------------------------

  void check_classes() {
    const auto& file = m_.classes.file;
    for (const auto& c : classes().classes) {
      for (const auto& r : c.associations)
        if (!classes().find(r.target))
          error(file, r.loc, codes::kUnknownType, "association " + c.name + "." + r.role + " targets undeclared class '" + r.target + "'");
      if (c.is_user) {
        for (const char* required : {"login", "password"}) {
          const auto* a = c.find_attribute(required);
          if (!a || a->type != BuiltinType::String)
            error(file, c.loc, codes::kUserClassCredentials,
                  "<<user>> class " + c.name + " must declare attribute '" + required + ": String'");
        }
      }
    }
  }

  void check_page(const Sourced<PageModel>& src) {
    const auto& page = src.model;
    const auto& file = src.file;
    std::map<std::string, Ty> params;
    for (const auto& p : page.params) params[p.name] = resolve(p.type, file, p.loc);

    auto param_type = [&](const std::string& name, const Loc& at) -> std::optional<Ty> {
      auto it = params.find(name);
      if (it == params.end()) {
        error(file, at, codes::kBadMember, "page " + page.name + " has no parameter '" + name + "'");
        return std::nullopt;
      }
      return it->second;
    };
    auto check_attr = [&](const Ty& owner, const std::string& attr, const Loc& at, bool builtin_only) {
      if (owner.is_unknown()) return;
      if (owner.kind != Ty::Kind::Class && owner.kind != Ty::Kind::SetOf) {
        error(file, at, codes::kBadMember, "'" + attr + "' accessed on non-object type " + owner.str());
        return;
      }
      auto t = member_type(owner.cls, attr);
      if (!t) {
        error(file, at, codes::kBadMember, "class " + owner.cls + " has no attribute '" + attr + "'");
      } else if (builtin_only && t->kind != Ty::Kind::Builtin) {
        error(file, at, codes::kBadMember, "input element needs a builtin attribute, " + owner.cls + "." + attr + " is " + t->str());
      }
    };

    for (const auto& el : page.elements) {
      std::visit(Overloaded{
                     [](const Heading&) {},
                     [](const Text&) {},
                     [&](const Output& o) {
                       auto t = param_type(o.param, o.loc);
                       if (!t || !o.attr) return;
                       if (t->kind == Ty::Kind::SetOf) {
                         error(file, o.loc, codes::kBadMember, "output of an attribute needs a single-object parameter, '" + o.param + "' is " + t->str());
                         return;
                       }
                       check_attr(*t, *o.attr, o.loc, false);
                     },
                     [&](const Input& i) {
                       auto t = param_type(i.param, i.loc);
                       if (!t) return;
                       if (t->kind == Ty::Kind::SetOf) {
                         error(file, i.loc, codes::kBadMember, "input needs a single-object parameter, '" + i.param + "' is " + t->str());
                         return;
                       }
                       check_attr(*t, i.attr, i.loc, true);
                     },
                     [&](const Table& tbl) {
                       auto t = param_type(tbl.param, tbl.loc);
                       if (!t || t->is_unknown()) return;
                       if (t->kind != Ty::Kind::SetOf) {
                         error(file, tbl.loc, codes::kBadMember, "table parameter '" + tbl.param + "' must be a Set<...>, found " + t->str());
                         return;
                       }
                       for (const auto& col : tbl.columns) check_attr(*t, col, tbl.loc, false);
                     },
                 },
                 el);
    }
  }

  // -------------------------------------------------------------------------

  struct Scope {
    std::map<std::string, Ty> names;
    std::set<std::string> used;
  };

  std::optional<Ty> lookup(Scope& scope, const std::string& name, const std::string& file, const Loc& at,
                           const char* code, const std::string& action) {
    auto it = scope.names.find(name);
    if (it == scope.names.end()) {
      error(file, at, code, "'" + name + "' is not a pin or variable of action " + action);
      return std::nullopt;
    }
    scope.used.insert(name);
    return it->second;
  }

  Ty expr_type(const Expr& e, Scope& scope, const std::string& file, const std::string& action) {
    return std::visit(
        Overloaded{
            [&](const VarRef& v) { return lookup(scope, v.name, file, e.loc, codes::kBadMember, action).value_or(Ty::unknown()); },
            [&](const NewObject& n) {
              if (!classes().find(n.class_name)) {
                error(file, e.loc, codes::kUnknownType, "'new " + n.class_name + "()' names an undeclared class");
                return Ty::unknown();
              }
              return Ty::of_class(n.class_name);
            },
            [&](const Getter& g) {
              auto recv = lookup(scope, g.receiver, file, e.loc, codes::kBadMember, action);
              if (!recv || recv->is_unknown()) return Ty::unknown();
              if (recv->kind != Ty::Kind::Class) {
                error(file, e.loc, codes::kBadMember, "getter on '" + g.receiver + "' of non-object type " + recv->str());
                return Ty::unknown();
              }
              auto t = member_type(recv->cls, g.attr);
              if (!t) {
                error(file, e.loc, codes::kBadMember, "class " + recv->cls + " has no attribute or role '" + g.attr + "'");
                return Ty::unknown();
              }
              return *t;
            },
            [&](const FirstOf& f) {
              auto recv = lookup(scope, f.receiver, file, e.loc, codes::kBadMember, action);
              if (!recv || recv->is_unknown()) return Ty::unknown();
              if (recv->kind != Ty::Kind::SetOf) {
                error(file, e.loc, codes::kBadMember, "'" + f.receiver + ".iterator().next()' needs a Set<...>, found " + recv->str());
                return Ty::unknown();
              }
              return Ty::of_class(recv->cls);
            },
        },
        e.node);
  }

  void check_script(const ScriptStmt& s, Scope& scope, const std::string& file, const std::string& action) {
    std::visit(Overloaded{
                   [&](const Assign& a) {
                     auto lhs = lookup(scope, a.lhs, file, s.loc, codes::kBadMember, action);
                     Ty rhs = expr_type(a.rhs, scope, file, action);
                     if (lhs && !lhs->compatible(rhs))
                       error(file, s.loc, codes::kBadMember, "cannot assign " + rhs.str() + " to '" + a.lhs + "' of type " + lhs->str());
                   },
                   [&](const Invoke& inv) {
                     auto recv = lookup(scope, inv.receiver, file, s.loc, codes::kBadMember, action);
                     Ty arg = expr_type(inv.arg, scope, file, action);
                     if (!recv || recv->is_unknown()) return;
                     if (recv->kind != Ty::Kind::Class) {
                       error(file, s.loc, codes::kBadMember, "setter on '" + inv.receiver + "' of non-object type " + recv->str());
                       return;
                     }
                     auto t = member_type(recv->cls, inv.attr);
                     if (!t) {
                       error(file, s.loc, codes::kBadMember, "class " + recv->cls + " has no attribute or role '" + inv.attr + "'");
                       return;
                     }
                     // A many-role accepts a whole set or a single element.
                     const bool ok = t->compatible(arg) ||
                                     (t->kind == Ty::Kind::SetOf && arg.kind == Ty::Kind::Class && arg.cls == t->cls);
                     if (!ok)
                       error(file, s.loc, codes::kBadMember,
                             "set" + capitalize(inv.attr) + " expects " + t->str() + ", got " + arg.str());
                   },
               },
               s.node);
  }

  void check_command(const CmdStmt& c, Scope& scope, const ActivityModel& act, const std::string& file,
                     const std::string& action) {
    std::visit(Overloaded{
                   [&](const LoadAll& l) {
                     auto target = lookup(scope, l.assign_to, file, c.loc, codes::kBadMember, action);
                     if (!classes().find(l.class_name)) {
                       error(file, c.loc, codes::kUnknownType, "loadAll on undeclared class '" + l.class_name + "'");
                       return;
                     }
                     if (target && !target->compatible(Ty::set_of(l.class_name)))
                       error(file, c.loc, codes::kBadMember, "'" + l.assign_to + "' must be Set<" + l.class_name + ">, is " + target->str());
                   },
                   [&](const GetActualUser& g) {
                     auto target = lookup(scope, g.assign_to, file, c.loc, codes::kBadMember, action);
                     if (target && !is_user_class(*target))
                       error(file, c.loc, codes::kBadMember, "getActualUser() needs a <<user>> class variable, '" + g.assign_to + "' is " + target->str());
                   },
                   [&](const AssignRole& r) {
                     if (!act.find_partition(r.partition))
                       error(file, c.loc, codes::kUnknownPartition, "activity " + act.name + " has no partition '" + r.partition + "'");
                     auto user = lookup(scope, r.user, file, c.loc, codes::kBadMember, action);
                     if (user && !is_user_class(*user))
                       error(file, c.loc, codes::kBadMember, "assignRole needs a <<user>> object, '" + r.user + "' is " + user->str());
                   },
                   [&](const SaveCmd& s) {
                     auto target = lookup(scope, s.target, file, c.loc, codes::kBadMember, action);
                     if (target && !target->is_unknown() && target->kind != Ty::Kind::Class)
                       error(file, c.loc, codes::kBadMember, "save() needs an object, '" + s.target + "' is " + target->str());
                   },
                   [](const Notify&) {},
               },
               c.command);
  }

  void check_view(const ViewStmt& v, Scope& scope, const std::string& file, const std::string& action) {
    const PageModel* page = find_page(v.page);
    if (!page) {
      error(file, v.loc, codes::kBadView, "view references undeclared page '" + v.page + "'");
      for (const auto& a : v.args) scope.used.insert(a);
      return;
    }
    std::vector<std::optional<Ty>> args;
    for (const auto& a : v.args) args.push_back(lookup(scope, a, file, v.loc, codes::kBadView, action));
    if (args.size() != page->params.size()) {
      error(file, v.loc, codes::kBadView,
            "page " + page->name + " expects " + std::to_string(page->params.size()) + " argument(s), got " + std::to_string(args.size()));
      return;
    }
    for (size_t i = 0; i < args.size(); ++i) {
      if (!args[i]) continue;
      const auto& p = page->params[i];
      // Unresolved page parameter types were already reported with the page.
      if (p.type.kind != TypeRef::Kind::Builtin && !classes().find(p.type.class_name)) continue;
      const Ty expected = p.type.kind == TypeRef::Kind::Builtin ? Ty::of_builtin(p.type.builtin)
                          : p.type.kind == TypeRef::Kind::Class ? Ty::of_class(p.type.class_name)
                                                                 : Ty::set_of(p.type.class_name);
      if (!expected.compatible(*args[i]))
        error(file, v.loc, codes::kBadView,
              "argument '" + v.args[i] + "' of type " + args[i]->str() + " does not match parameter '" + p.name + "' of type " + expected.str());
    }
  }

  void check_guard(const GuardExpr& g, Scope& scope, const std::string& file, const std::string& action) {
    switch (g.kind) {
      case GuardExpr::Kind::Literal:
        return;
      case GuardExpr::Kind::VarRef:
        lookup(scope, g.name, file, g.loc, codes::kBadMember, action);
        return;
      case GuardExpr::Kind::Getter: {
        Expr e{Getter{g.name, g.attr}, g.loc};
        expr_type(e, scope, file, action);
        return;
      }
      default:
        for (const auto& op : g.operands) check_guard(op, scope, file, action);
    }
  }

  void check_activity(const Sourced<ActivityModel>& src) {
    const auto& act = src.model;
    const auto& file = src.file;

    std::map<std::string, Scope> scopes;
    std::map<std::string, std::map<std::string, Ty>> in_types, out_types;
    for (const auto& a : act.actions) {
      Scope& scope = scopes[a.name];
      for (const auto& d : a.in_pins) scope.names[d.name] = in_types[a.name][d.name] = resolve(d.type, file, d.loc);
      for (const auto& d : a.out_pins) scope.names[d.name] = out_types[a.name][d.name] = resolve(d.type, file, d.loc);
      for (const auto& d : a.vars) scope.names[d.name] = resolve(d.type, file, d.loc);

      for (const auto& stmt : a.body) {
        std::visit(Overloaded{
                       [&](const CmdStmt& c) { check_command(c, scope, act, file, a.name); },
                       [&](const ViewStmt& v) { check_view(v, scope, file, a.name); },
                       [&](const ScriptBlock& b) {
                         for (const auto& s : b.statements) check_script(s, scope, file, a.name);
                       },
                   },
                   stmt);
      }

      if (a.is_interactive() && !act.partition_of(a.name))
        error(file, a.loc, codes::kUnpartitioned, "interactive action " + a.name + " is not listed in any partition");
    }

    // Edges: pin existence and compatibility, guards in the source scope.
    std::map<std::string, std::set<std::string>> fed_pins;
    for (const auto& e : act.edges) {
      std::optional<Ty> src_type;
      if (e.source.kind == NodeRef::Kind::Action && e.source.pin) {
        auto& outs = out_types[e.source.action];
        auto it = outs.find(*e.source.pin);
        if (it == outs.end())
          error(file, e.source.loc, codes::kPinMismatch, "'" + *e.source.pin + "' is not an out-pin of action " + e.source.action);
        else
          src_type = it->second;
      }
      for (const auto& t : e.targets) {
        if (t.guard) {
          if (e.source.kind == NodeRef::Kind::Action) {
            check_guard(*t.guard, scopes[e.source.action], file, e.source.action);
          } else {
            Scope empty;
            check_guard(*t.guard, empty, file, "initial");
          }
        }
        if (t.node.kind != NodeRef::Kind::Action || !t.node.pin) continue;
        auto& ins = in_types[t.node.action];
        auto it = ins.find(*t.node.pin);
        if (it == ins.end()) {
          error(file, t.node.loc, codes::kPinMismatch, "'" + *t.node.pin + "' is not an in-pin of action " + t.node.action);
          continue;
        }
        fed_pins[t.node.action].insert(*t.node.pin);
        if (src_type && !src_type->compatible(it->second))
          error(file, t.node.loc, codes::kPinMismatch,
                "edge connects " + e.source.action + "." + *e.source.pin + " (" + src_type->str() + ") to " + t.node.action + "." +
                    *t.node.pin + " (" + it->second.str() + ")");
      }
    }

    auto reach = reachable_actions(act, file);
    for (auto& w : reach.warnings) out_.push_back(std::move(w));
    if (!act.initial_edge()) warn(file, act.loc, codes::kNoInitial, "activity " + act.name + " has no edge from 'initial' and cannot be started");

    for (const auto& a : act.actions) {
      if (reach.actions.count(a.name)) {
        for (const auto& p : a.in_pins)
          if (!fed_pins[a.name].count(p.name))
            error(file, p.loc, codes::kUnfedInPin, "in-pin " + a.name + "." + p.name + " has no incoming edge");
      }
      for (const auto& v : a.vars)
        if (!scopes[a.name].used.count(v.name)) warn(file, v.loc, codes::kUnusedVar, "variable '" + v.name + "' of action " + a.name + " is never used");
      if (!a.is_interactive()) {
        if (const auto* out = act.outgoing(a.name); out && out->is_decision()) {
          for (const auto& t : out->targets) {
            if (!t.guard) {
              warn(file, out->loc, codes::kAutomaticChoice,
                   "automatic action " + a.name + " is followed by an unguarded alternative; nobody can choose it");
              break;
            }
          }
        }
      }
    }

    check_automatic_cycles(act, file);
  }

  void check_automatic_cycles(const ActivityModel& act, const std::string& file) {
    std::map<std::string, std::vector<std::string>> succ;
    for (const auto& e : act.edges) {
      if (e.source.kind != NodeRef::Kind::Action) continue;
      const auto* from = act.find_action(e.source.action);
      if (!from || from->is_interactive()) continue;
      for (const auto& t : e.targets) {
        if (t.node.kind != NodeRef::Kind::Action) continue;
        const auto* to = act.find_action(t.node.action);
        if (to && !to->is_interactive()) succ[from->name].push_back(to->name);
      }
    }
    enum class Mark { None, Active, Done };
    std::map<std::string, Mark> mark;
    std::function<bool(const std::string&)> dfs = [&](const std::string& n) {
      mark[n] = Mark::Active;
      for (const auto& s : succ[n]) {
        if (mark[s] == Mark::Active) return true;
        if (mark[s] == Mark::None && dfs(s)) return true;
      }
      mark[n] = Mark::Done;
      return false;
    };
    for (const auto& a : act.actions) {
      if (a.is_interactive() || mark[a.name] != Mark::None) continue;
      if (dfs(a.name)) {
        error(file, a.loc, codes::kAutomaticCycle, "automatic actions of " + act.name + " form a cycle through " + a.name);
        return;
      }
    }
  }

  void check_entry(const MenuEntry& e, const std::string& file) {
    std::visit(Overloaded{
                   [&](const PageEntry& p) {
                     if (!find_page(p.page)) error(file, p.loc, codes::kBadMenuEntry, "menu/rights entry names undeclared page '" + p.page + "'");
                   },
                   [&](const ActivityEntry& a) {
                     bool found = false;
                     for (const auto& act : m_.activities) found = found || act.model.name == a.activity;
                     if (!found) error(file, a.loc, codes::kBadMenuEntry, "menu/rights entry names undeclared activity '" + a.activity + "'");
                   },
                   [&](const ClassEntry& c) {
                     if (!classes().find(c.class_name))
                       error(file, c.loc, codes::kBadMenuEntry, "menu/rights entry names undeclared class '" + c.class_name + "'");
                   },
               },
               e);
  }

  void check_app() {
    for (const auto& e : m_.app.model.menu) check_entry(e, m_.app.file);
    for (const auto& r : m_.app.model.rights)
      for (const auto& e : r.allowed) check_entry(e, m_.app.file);
  }

  const ModelSet& m_;
  std::vector<Diagnostic> out_;
};

}  // namespace

Reachability reachable_actions(const ActivityModel& activity, std::string_view file) {
  Reachability result;
  std::deque<std::string> queue;
  auto visit_targets = [&](const EdgeDef& e) {
    for (const auto& t : e.targets)
      if (t.node.kind == NodeRef::Kind::Action && result.actions.insert(t.node.action).second) queue.push_back(t.node.action);
  };
  if (const auto* init = activity.initial_edge()) visit_targets(*init);
  while (!queue.empty()) {
    const std::string current = std::move(queue.front());
    queue.pop_front();
    for (const auto& e : activity.edges)
      if (e.source.kind == NodeRef::Kind::Action && e.source.action == current) visit_targets(e);
  }
  for (const auto& a : activity.actions)
    if (!result.actions.count(a.name))
      result.warnings.push_back({Severity::Warning,
                                 {std::string(file), a.loc.line, a.loc.column},
                                 link_codes::kUnreachable,
                                 "action " + a.name + " is not reachable from 'initial'"});
  return result;
}

const ActivityModel* LinkedSystem::find_activity(std::string_view name) const {
  auto it = activities_.find(name);
  return it == activities_.end() ? nullptr : &it->second;
}

const PageModel* LinkedSystem::find_page(std::string_view name) const {
  auto it = pages_.find(name);
  return it == pages_.end() ? nullptr : &it->second;
}

const std::set<std::string>& LinkedSystem::reachable(std::string_view activity) const {
  static const std::set<std::string> kEmpty;
  auto it = reachable_.find(activity);
  return it == reachable_.end() ? kEmpty : it->second;
}

bool LinkedSystem::has_user_classes() const {
  for (const auto& c : classes_.classes)
    if (c.is_user) return true;
  return false;
}

Parsed<LinkedSystem> link(ModelSet models) {
  Parsed<LinkedSystem> result;
  std::set<std::string> seen;
  for (const auto& a : models.activities)
    if (!seen.insert("activity:" + a.model.name).second)
      result.diagnostics.push_back({Severity::Error, {a.file, a.model.loc.line, a.model.loc.column}, codes::kDuplicateModel,
                                    "activity " + a.model.name + " is defined more than once"});
  for (const auto& p : models.pages)
    if (!seen.insert("page:" + p.model.name).second)
      result.diagnostics.push_back({Severity::Error, {p.file, p.model.loc.line, p.model.loc.column}, codes::kDuplicateModel,
                                    "page " + p.model.name + " is defined more than once"});

  auto diags = Linker(models).run();
  result.diagnostics.insert(result.diagnostics.end(), diags.begin(), diags.end());
  if (has_errors(result.diagnostics)) return result;

  LinkedSystem sys;
  sys.classes_ = std::move(models.classes.model);
  sys.app_ = std::move(models.app.model);
  for (auto& a : models.activities) {
    sys.reachable_[a.model.name] = reachable_actions(a.model).actions;
    std::string name = a.model.name;
    sys.activities_.emplace(std::move(name), std::move(a.model));
  }
  for (auto& p : models.pages) {
    std::string name = p.model.name;
    sys.pages_.emplace(std::move(name), std::move(p.model));
  }
  result.value = std::move(sys);
  return result;
}

}  // namespace wisflow
