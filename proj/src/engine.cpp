#include "wisflow/engine.hpp"

#include <algorithm>
#include <set>

namespace wisflow {

namespace {

using namespace ast;

template <class... F>
struct Overload : F... {
  using F::operator()...;
};
template <class... F>
Overload(F...) -> Overload<F...>;

// Bound on consecutive automatic actions, a backstop behind the linker's
// cycle check.
constexpr int kMaxAutomaticSteps = 10000;

std::string target_label(const EdgeTarget& t) {
  return t.node.kind == NodeRef::Kind::Final ? "final" : t.node.action;
}

bool same_entry(const MenuEntry& a, const MenuEntry& b) {
  if (a.index() != b.index()) return false;
  return std::visit(Overload{
                        [&](const PageEntry& p) { return p.page == std::get<PageEntry>(b).page; },
                        [&](const ActivityEntry& p) { return p.activity == std::get<ActivityEntry>(b).activity; },
                        [&](const ClassEntry& p) { return p.class_name == std::get<ClassEntry>(b).class_name; },
                    },
                    a);
}

bool primitives_equal(const Primitive& a, const Primitive& b) {
  auto number = [](const Primitive& p) -> std::optional<double> {
    if (const auto* i = std::get_if<std::int64_t>(&p)) return static_cast<double>(*i);
    if (const auto* d = std::get_if<double>(&p)) return *d;
    return std::nullopt;
  };
  if (auto x = number(a), y = number(b); x && y) return *x == *y;
  return a == b;
}

bool values_equal(const Value& a, const Value& b) {
  const auto* pa = std::get_if<Primitive>(&a);
  const auto* pb = std::get_if<Primitive>(&b);
  if (pa && pb) return primitives_equal(*pa, *pb);
  return a == b;
}

Json object_summary(const DomainObject& o, const ClassDef& def) {
  Json fields = Json::object();
  for (const auto& attr : def.attributes) {
    if (def.is_user && attr.name == "password") continue;
    auto it = o.fields.find(attr.name);
    fields[attr.name] = it == o.fields.end() ? Json(nullptr) : primitive_to_json(it->second);
  }
  return {{"id", o.id}, {"class", o.class_name}, {"fields", fields}};
}

/// One engine call: a working copy of the context plus a store transaction.
/// Nothing is visible to others until `commit`.
class Step {
 public:
  Step(const LinkedSystem& system, Store& store, ExecutionContext ctx, std::string user)
      : system_(system), store_(store), txn_(store.begin()), ctx_(std::move(ctx)), user_(std::move(user)) {
    act_ = system_.find_activity(ctx_.activity);
    if (!act_) throw EngineError(EngineErrorKind::NotFound, "unknown activity '" + ctx_.activity + "'");
    next_.instance = ctx_.instance_id;
  }

  ExecutionContext& ctx() { return ctx_; }
  const ActivityModel& activity() const { return *act_; }
  NextStep& next() { return next_; }

  void commit() {
    if (ctx_.token.completed) {
      txn_.finish_context(ctx_.instance_id);
    } else {
      txn_.save_context(ctx_);
    }
    try {
      txn_.commit();
    } catch (const StoreError& e) {
      throw EngineError(EngineErrorKind::Conflict, e.what());
    }
  }

  // ---- token movement

  void start() {
    const EdgeDef* edge = act_->initial_edge();
    if (!edge) throw EngineError(EngineErrorKind::NotStartable, "activity " + act_->name + " has no initial edge");
    const auto& first = choose(*edge, "", false, std::nullopt);
    if (first.node.kind == NodeRef::Kind::Action) {
      if (const auto* p = act_->partition_of(first.node.action)) ctx_.role_bindings[p->name] = user_;
    }
    follow(*edge, first, "", std::nullopt);
  }

  /// Moves the token out of `from` along its outgoing edge and onwards
  /// through automatic actions.
  void leave(const std::string& from, const std::optional<std::string>& decision) {
    const EdgeDef* edge = act_->outgoing(from);
    if (!edge) {
      finish();
      return;
    }
    const auto& target = choose(*edge, from, true, decision);
    follow(*edge, target, from, decision);
  }

  void follow(const EdgeDef& first_edge, const EdgeTarget& first_target, std::string from,
              const std::optional<std::string>& decision) {
    const EdgeDef* edge = &first_edge;
    const EdgeTarget* target = &first_target;
    for (int steps = 0;; ++steps) {
      if (steps > kMaxAutomaticSteps) fail(from, "automatic actions do not terminate");
      Value carried;
      if (edge->source.pin && target->node.pin) carried = get(from, *edge->source.pin);
      if (target->node.kind == NodeRef::Kind::Final) {
        finish();
        return;
      }
      const std::string to = target->node.action;
      enter(to);
      if (target->node.pin) set(to, *target->node.pin, carried);
      const ActionDef& def = *act_->find_action(to);
      if (def.is_interactive()) {
        if (const auto* p = act_->partition_of(to); p && !ctx_.role_bindings.count(p->name))
          ctx_.role_bindings[p->name] = user_;
        ctx_.token = {false, to, Phase::BeforeView};
        next_.finished = false;
        next_.action = to;
        next_.epoch = ++ctx_.epoch;
        return;
      }
      run(def, 0, def.body.size());
      from = to;
      edge = act_->outgoing(from);
      if (!edge) {
        finish();
        return;
      }
      target = &choose(*edge, from, false, decision);
    }
  }

  void enter(const std::string& action) {
    const std::string prefix = action + ".";
    for (auto it = ctx_.bindings.begin(); it != ctx_.bindings.end();)
      it = it->first.compare(0, prefix.size(), prefix) == 0 ? ctx_.bindings.erase(it) : std::next(it);
    ctx_.token = {false, action, Phase::BeforeView};
    next_.visited.push_back(action);
  }

  void finish() {
    ctx_.token = {true, {}, Phase::BeforeView};
    next_.finished = true;
    next_.action.clear();
    next_.epoch = ctx_.epoch;
  }

  /// First target whose guard holds; otherwise the user's pick among the
  /// unguarded ones.
  const EdgeTarget& choose(const EdgeDef& edge, const std::string& from, bool user_choice,
                           const std::optional<std::string>& decision) {
    std::vector<const EdgeTarget*> open;
    for (const auto& t : edge.targets) {
      if (!t.guard) {
        open.push_back(&t);
        continue;
      }
      if (truthy(from, eval_guard(from, *t.guard))) return t;
    }
    if (open.empty()) fail(from, "no guard of the outgoing decision holds");
    if (!edge.is_decision()) return *open.front();
    if (!user_choice)
      fail(from, "automatic action reached a decision that needs a user choice");
    if (!decision) {
      std::string labels;
      for (const auto* t : open) labels += (labels.empty() ? "" : ", ") + target_label(*t);
      throw EngineError(EngineErrorKind::Validation, "a decision is required",
                        {{"_decision", "choose one of: " + labels}});
    }
    for (const auto* t : open)
      if (target_label(*t) == *decision) return *t;
    throw EngineError(EngineErrorKind::Validation, "unknown decision '" + *decision + "'",
                      {{"_decision", "not an offered option"}});
  }

  // ---- statements

  void run(const ActionDef& action, std::size_t from, std::size_t to) {
    for (std::size_t i = from; i < to && i < action.body.size(); ++i) {
      std::visit(Overload{
                     [&](const CmdStmt& c) { command(action.name, c.command); },
                     [&](const ViewStmt&) {},
                     [&](const ScriptBlock& b) {
                       for (const auto& s : b.statements) script(action.name, s);
                     },
                 },
                 action.body[i]);
    }
  }

  void command(const std::string& action, const Command& cmd) {
    std::visit(Overload{
                   [&](const LoadAll& l) {
                     ObjSet set;
                     for (const auto& o : txn_.load_all(l.class_name)) set.items.push_back({o.id});
                     set_local(action, l.assign_to, set);
                   },
                   [&](const GetActualUser& g) {
                     if (user_.empty()) fail(action, "no user is logged in");
                     set_local(action, g.assign_to, ObjRef{user_});
                   },
                   [&](const AssignRole& r) {
                     const auto v = get(action, r.user);
                     const auto* ref = std::get_if<ObjRef>(&v);
                     if (!ref) fail(action, "assignRole(" + r.partition + ", " + r.user + ") needs a user object");
                     if (ref->transient()) fail(action, "assignRole needs a saved user");
                     ctx_.role_bindings[r.partition] = ref->id;
                   },
                   [&](const SaveCmd& s) {
                     const auto v = get(action, s.target);
                     const auto* ref = std::get_if<ObjRef>(&v);
                     if (!ref) fail(action, "save(" + s.target + ") needs an object");
                     if (ref->transient()) persist(action, ref->id);
                   },
                   [&](const Notify& n) {
                     std::set<std::string> seen;
                     for (const auto& [partition, user] : ctx_.role_bindings) {
                       if (user.empty() || !seen.insert(user).second) continue;
                       txn_.deliver(user, {ctx_.instance_id, ctx_.activity, n.message});
                       ctx_.notifications.push_back({user, n.message});
                       next_.notifications.push_back({user, n.message});
                     }
                   },
               },
               cmd);
  }

  void script(const std::string& action, const ScriptStmt& stmt) {
    std::visit(Overload{
                   [&](const Assign& a) { set_local(action, a.lhs, eval(action, a.rhs)); },
                   [&](const Invoke& inv) {
                     const auto recv = get(action, inv.receiver);
                     const auto* ref = std::get_if<ObjRef>(&recv);
                     if (!ref) fail(action, "'" + inv.receiver + "' is null");
                     write_attr(action, *ref, inv.attr, eval(action, inv.arg));
                   },
               },
               stmt.node);
  }

  Value eval(const std::string& action, const Expr& e) {
    return std::visit(Overload{
                          [&](const VarRef& v) { return get(action, v.name); },
                          [&](const NewObject& n) -> Value {
                            const auto id = transient_id(ctx_.next_temp++);
                            ctx_.transient_objects[id] = DomainObject{n.class_name, id, {}, {}};
                            return ObjRef{id};
                          },
                          [&](const Getter& g) -> Value {
                            const auto recv = get(action, g.receiver);
                            const auto* ref = std::get_if<ObjRef>(&recv);
                            if (!ref) fail(action, "'" + g.receiver + "' is null");
                            return read_attr(action, *ref, g.attr);
                          },
                          [&](const FirstOf& f) -> Value {
                            const auto v = get(action, f.receiver);
                            const auto* set = std::get_if<ObjSet>(&v);
                            if (!set || set->items.empty())
                              fail(action, "'" + f.receiver + ".iterator().next()' on an empty collection");
                            return set->items.front();
                          },
                      },
                      e.node);
  }

  // ---- objects

  DomainObject object(const std::string& action, const ObjRef& ref) {
    if (ref.transient()) {
      auto it = ctx_.transient_objects.find(ref.id);
      if (it == ctx_.transient_objects.end()) fail(action, "unsaved object '" + ref.id + "' is gone");
      return it->second;
    }
    auto found = txn_.find(ref.id);
    if (!found) fail(action, "object '" + ref.id + "' no longer exists");
    return *found;
  }

  Value read_attr(const std::string& action, const ObjRef& ref, const std::string& attr) {
    const auto o = object(action, ref);
    const auto& def = *system_.find_class(o.class_name);
    if (def.find_attribute(attr)) {
      auto it = o.fields.find(attr);
      return it == o.fields.end() ? Value{} : Value{it->second};
    }
    const auto* assoc = def.find_association(attr);
    if (!assoc) fail(action, "class " + o.class_name + " has no attribute '" + attr + "'");
    auto it = o.links.find(attr);
    if (assoc->multiplicity == Multiplicity::One) {
      if (it == o.links.end() || it->second.empty()) return Value{};
      return ObjRef{it->second.front()};
    }
    ObjSet set;
    if (it != o.links.end())
      for (const auto& id : it->second) set.items.push_back({id});
    return set;
  }

  void write_attr(const std::string& action, const ObjRef& ref, const std::string& attr, const Value& value) {
    auto o = object(action, ref);
    const auto& def = *system_.find_class(o.class_name);
    if (const auto* a = def.find_attribute(attr)) {
      const auto* prim = std::get_if<Primitive>(&value);
      if (!prim) fail(action, o.class_name + "." + attr + " takes a " + std::string(to_string(a->type)) + " value");
      Primitive p = *prim;
      if (auto msg = check_builtin(a->type, p); !msg.empty()) fail(action, o.class_name + "." + attr + ": " + msg);
      if (ref.transient()) {
        if (std::holds_alternative<std::monostate>(p)) {
          ctx_.transient_objects[ref.id].fields.erase(attr);
        } else {
          ctx_.transient_objects[ref.id].fields[attr] = p;
        }
      } else {
        store_call(action, [&] { txn_.update(o.class_name, o.id, {{attr, p}}); });
      }
      return;
    }
    const auto* assoc = def.find_association(attr);
    if (!assoc) fail(action, "class " + o.class_name + " has no attribute '" + attr + "'");
    std::vector<std::string> ids;
    std::visit(Overload{
                   [&](const Primitive& p) {
                     if (!std::holds_alternative<std::monostate>(p)) fail(action, "role '" + attr + "' takes objects");
                   },
                   [&](const ObjRef& r) { ids.push_back(r.id); },
                   [&](const ObjSet& s) {
                     for (const auto& r : s.items) ids.push_back(r.id);
                   },
               },
               value);
    if (assoc->multiplicity == Multiplicity::One && ids.size() > 1) fail(action, "role '" + attr + "' takes one object");
    if (ref.transient()) {
      if (ids.empty()) {
        ctx_.transient_objects[ref.id].links.erase(attr);
      } else {
        ctx_.transient_objects[ref.id].links[attr] = ids;
      }
      return;
    }
    for (const auto& id : ids)
      if (is_transient_id(id)) fail(action, "a saved object cannot link to an unsaved one; save it first");
    store_call(action, [&] { txn_.update(o.class_name, o.id, {}, {{attr, ids}}); });
  }

  /// Saves a transient object together with every unsaved object it links
  /// to, then rewrites all references to the new ids.
  void persist(const std::string& action, const std::string& temp) {
    std::vector<std::string> closure{temp};
    for (std::size_t i = 0; i < closure.size(); ++i) {
      auto it = ctx_.transient_objects.find(closure[i]);
      if (it == ctx_.transient_objects.end()) fail(action, "unsaved object '" + closure[i] + "' is gone");
      for (const auto& [role, ids] : it->second.links)
        for (const auto& id : ids)
          if (is_transient_id(id) && std::find(closure.begin(), closure.end(), id) == closure.end())
            closure.push_back(id);
    }
    std::map<std::string, std::string> renamed;
    store_call(action, [&] {
      for (const auto& t : closure) renamed[t] = txn_.reserve_id(ctx_.transient_objects.at(t).class_name);
      for (const auto& t : closure) {
        auto o = ctx_.transient_objects.at(t);
        for (auto& [role, ids] : o.links)
          for (auto& id : ids)
            if (auto r = renamed.find(id); r != renamed.end()) id = r->second;
        txn_.create_object(o.class_name, o.fields, o.links, renamed.at(t));
      }
    });
    auto rename = [&](std::string& id) {
      if (auto r = renamed.find(id); r != renamed.end()) id = r->second;
    };
    for (const auto& t : closure) ctx_.transient_objects.erase(t);
    for (auto& [_, o] : ctx_.transient_objects)
      for (auto& [role, ids] : o.links)
        for (auto& id : ids) rename(id);
    for (auto& [_, v] : ctx_.bindings) {
      if (auto* r = std::get_if<ObjRef>(&v)) rename(r->id);
      if (auto* s = std::get_if<ObjSet>(&v))
        for (auto& r : s->items) rename(r.id);
    }
  }

  template <class F>
  void store_call(const std::string& action, F&& f) {
    try {
      f();
    } catch (const StoreError& e) {
      fail(action, e.what());
    }
  }

  // ---- guards

  Value eval_guard(const std::string& action, const GuardExpr& g) {
    switch (g.kind) {
      case GuardExpr::Kind::Literal:
        return g.literal;
      case GuardExpr::Kind::VarRef:
        return get(action, g.name);
      case GuardExpr::Kind::Getter: {
        const auto recv = get(action, g.name);
        const auto* ref = std::get_if<ObjRef>(&recv);
        return ref ? read_attr(action, *ref, g.attr) : Value{};
      }
      case GuardExpr::Kind::Equal:
      case GuardExpr::Kind::NotEqual: {
        const bool eq = values_equal(eval_guard(action, g.operands[0]), eval_guard(action, g.operands[1]));
        return Primitive(g.kind == GuardExpr::Kind::Equal ? eq : !eq);
      }
      case GuardExpr::Kind::And:
        return Primitive(truthy(action, eval_guard(action, g.operands[0])) &&
                         truthy(action, eval_guard(action, g.operands[1])));
      case GuardExpr::Kind::Or:
        return Primitive(truthy(action, eval_guard(action, g.operands[0])) ||
                         truthy(action, eval_guard(action, g.operands[1])));
      case GuardExpr::Kind::Not:
        return Primitive(!truthy(action, eval_guard(action, g.operands[0])));
    }
    return Value{};
  }

  /// Null counts as false; anything but Bool is a runtime error.
  bool truthy(const std::string& action, const Value& v) {
    if (is_null(v)) return false;
    const auto* p = std::get_if<Primitive>(&v);
    if (!p || !std::holds_alternative<bool>(*p)) fail(action, "guard does not evaluate to a Bool");
    return std::get<bool>(*p);
  }

  // ---- pages

  struct Resolved {
    const PageModel* page = nullptr;
    std::map<std::string, Value> params;
  };

  Resolved resolve_view(const ActionDef& action) {
    const ViewStmt* view = action.view();
    Resolved r;
    r.page = system_.find_page(view->page);
    for (std::size_t i = 0; i < view->args.size() && i < r.page->params.size(); ++i)
      r.params[r.page->params[i].name] = get(action.name, view->args[i]);
    return r;
  }

  DomainObject param_object(const std::string& action, const Resolved& r, const std::string& param) {
    const auto& v = r.params.at(param);
    const auto* ref = std::get_if<ObjRef>(&v);
    if (!ref) fail(action, "page parameter '" + param + "' is null");
    return object(action, *ref);
  }

  Json cell(const DomainObject& o, const std::string& attr) {
    auto f = o.fields.find(attr);
    if (f != o.fields.end()) return primitive_to_json(f->second);
    auto l = o.links.find(attr);
    if (l != o.links.end()) return l->second;
    return nullptr;
  }

  std::string type_name(const DomainObject& o, const std::string& attr) {
    const auto& def = *system_.find_class(o.class_name);
    if (const auto* a = def.find_attribute(attr)) return std::string(to_string(a->type));
    if (const auto* assoc = def.find_association(attr))
      return assoc->multiplicity == Multiplicity::One ? assoc->target : "Set<" + assoc->target + ">";
    return "String";
  }

  std::vector<std::string> table_columns(const Table& t, const std::string& class_name) {
    if (!t.columns.empty()) return t.columns;
    std::vector<std::string> cols;
    const auto& def = *system_.find_class(class_name);
    for (const auto& a : def.attributes)
      if (!(def.is_user && a.name == "password")) cols.push_back(a.name);
    return cols;
  }

  /// Ids offered by the first selectable table, if the page has one.
  std::optional<std::vector<std::string>> selectable_rows(const std::string& action, const Resolved& r) {
    for (const auto& el : r.page->elements) {
      const auto* t = std::get_if<Table>(&el);
      if (!t || !t->selectable) continue;
      std::vector<std::string> ids;
      if (const auto* set = std::get_if<ObjSet>(&r.params.at(t->param)))
        for (const auto& ref : set->items) ids.push_back(object(action, ref).id);
      return ids;
    }
    return std::nullopt;
  }

  PageRender render(const ActionDef& action) {
    const auto r = resolve_view(action);
    PageRender out;
    out.instance = ctx_.instance_id;
    out.action = action.name;
    out.page = r.page->name;
    out.epoch = ctx_.epoch;
    for (const auto& el : r.page->elements) {
      std::visit(Overload{
                     [&](const Heading& h) {
                       out.elements.push_back({{"kind", "heading"}, {"level", h.level}, {"text", h.text}});
                     },
                     [&](const Text& t) { out.elements.push_back({{"kind", "text"}, {"text", t.text}}); },
                     [&](const Output& o) {
                       Json e{{"kind", "output"}, {"param", o.param}, {"editable", false}};
                       if (o.attr) {
                         const auto obj = param_object(action.name, r, o.param);
                         e["attr"] = *o.attr;
                         e["type"] = type_name(obj, *o.attr);
                         e["value"] = cell(obj, *o.attr);
                       } else {
                         e["value"] = display(action.name, r.params.at(o.param));
                       }
                       out.elements.push_back(e);
                     },
                     [&](const Input& i) {
                       const auto obj = param_object(action.name, r, i.param);
                       const auto field = i.param + "." + i.attr;
                       const auto type = type_name(obj, i.attr);
                       out.fields[field] = type;
                       out.elements.push_back({{"kind", "input"},
                                               {"param", i.param},
                                               {"attr", i.attr},
                                               {"field", field},
                                               {"type", type},
                                               {"value", cell(obj, i.attr)},
                                               {"editable", true}});
                     },
                     [&](const Table& t) {
                       Json rows = Json::array();
                       std::vector<std::string> cols = t.columns;
                       if (const auto* set = std::get_if<ObjSet>(&r.params.at(t.param))) {
                         for (const auto& ref : set->items) {
                           const auto obj = object(action.name, ref);
                           cols = table_columns(t, obj.class_name);
                           Json cells = Json::array();
                           for (const auto& c : cols) cells.push_back(cell(obj, c));
                           rows.push_back({{"id", obj.id}, {"cells", cells}});
                         }
                       }
                       if (cols.empty()) {
                         const auto* decl = r.page->find_param(t.param);
                         if (system_.find_class(decl->type.class_name)) cols = table_columns(t, decl->type.class_name);
                       }
                       Json e{{"kind", "table"}, {"param", t.param}, {"selectable", t.selectable},
                              {"columns", cols}, {"rows", rows}};
                       if (t.selectable) e["field"] = "_selection";
                       out.elements.push_back(e);
                     },
                 },
                 el);
    }
    out.decisions = decision_options(action.name);
    return out;
  }

  Json display(const std::string& action, const Value& v) {
    return std::visit(Overload{
                          [&](const Primitive& p) { return primitive_to_json(p); },
                          [&](const ObjRef& r) {
                            const auto o = object(action, r);
                            return object_summary(o, *system_.find_class(o.class_name));
                          },
                          [&](const ObjSet& s) {
                            Json items = Json::array();
                            for (const auto& r : s.items) items.push_back(display(action, r));
                            return items;
                          },
                      },
                      v);
  }

  std::vector<std::string> decision_options(const std::string& action) const {
    std::vector<std::string> out;
    const EdgeDef* edge = act_->outgoing(action);
    if (!edge || !edge->is_decision()) return out;
    for (const auto& t : edge->targets)
      if (!t.guard) out.push_back(target_label(t));
    return out;
  }

  /// Checks the submission against the rendered page, then writes form
  /// values and the selection back into the page parameters.
  void write_back(const ActionDef& action, const Submission& sub) {
    const auto page = render(action);
    const auto r = resolve_view(action);
    std::map<std::string, std::string> errors;
    std::map<std::string, Primitive> parsed;
    for (const auto& [field, type] : page.fields) {
      auto it = sub.form.find(field);
      if (it == sub.form.end()) {
        errors[field] = "required";
        continue;
      }
      const auto builtin = builtin_from_string(type);
      auto value = builtin ? parse_builtin_text(*builtin, it->second) : std::nullopt;
      if (!value) {
        Primitive raw = it->second;
        auto msg = builtin ? check_builtin(*builtin, raw) : "not editable";
        errors[field] = msg.empty() ? "expected " + type : msg;
        continue;
      }
      parsed[field] = *value;
    }
    for (const auto& [field, _] : sub.form)
      if (!page.fields.count(field)) errors[field] = "unknown field";

    const auto rows = selectable_rows(action.name, r);
    if (rows) {
      if (sub.selection) {
        if (std::find(rows->begin(), rows->end(), *sub.selection) == rows->end())
          errors["_selection"] = "not one of the listed objects";
      } else if (!rows->empty()) {
        errors["_selection"] = "select one row";
      }
    } else if (sub.selection) {
      errors["_selection"] = "nothing to select on this page";
    }

    const auto options = decision_options(action.name);
    if (sub.decision) {
      if (options.empty()) {
        errors["_decision"] = "no decision is offered here";
      } else if (std::find(options.begin(), options.end(), *sub.decision) == options.end()) {
        errors["_decision"] = "not an offered option";
      }
    }
    if (!errors.empty()) throw EngineError(EngineErrorKind::Validation, "submission rejected", errors);

    for (const auto& [field, value] : parsed) {
      const auto dot = field.find('.');
      const auto obj = param_object(action.name, r, field.substr(0, dot));
      write_attr(action.name, ObjRef{obj.id}, field.substr(dot + 1), value);
    }
    if (rows && sub.selection) {
      for (const auto& el : r.page->elements) {
        const auto* t = std::get_if<Table>(&el);
        if (!t || !t->selectable) continue;
        const auto& view = *action.view();
        const auto index = static_cast<std::size_t>(r.page->find_param(t->param) - r.page->params.data());
        set_local(action.name, view.args.at(index), ObjSet{{ObjRef{*sub.selection}}});
        break;
      }
    }
  }

  // ---- bindings

  Value get(const std::string& action, const std::string& name) const {
    auto it = ctx_.bindings.find(binding_key(action, name));
    return it == ctx_.bindings.end() ? Value{} : it->second;
  }
  void set(const std::string& action, const std::string& name, Value v) {
    ctx_.bindings[binding_key(action, name)] = std::move(v);
  }
  void set_local(const std::string& action, const std::string& name, Value v) { set(action, name, std::move(v)); }

  [[noreturn]] void fail(const std::string& action, const std::string& message) const {
    throw EngineError(EngineErrorKind::ActionFailed, (action.empty() ? "" : action + ": ") + message);
  }

 private:
  const LinkedSystem& system_;
  Store& store_;
  Transaction txn_;
  ExecutionContext ctx_;
  std::string user_;
  const ActivityModel* act_ = nullptr;
  NextStep next_;
};

std::size_t view_index(const ActionDef& action) {
  for (std::size_t i = 0; i < action.body.size(); ++i)
    if (std::holds_alternative<ViewStmt>(action.body[i])) return i;
  return action.body.size();
}

}  // namespace

// ---------------------------------------------------------------- PageRender

Json PageRender::to_json() const {
  return {{"instance", instance}, {"action", action}, {"page", page},
          {"elements", elements}, {"decisions", decisions}, {"fields", fields}};
}

// ---------------------------------------------------------------- Access

bool Access::open() const { return !system_->has_user_classes(); }

bool Access::permits(std::string_view user, const MenuEntry& entry) const {
  if (open() || system_->app().rights.empty()) return true;
  const auto role = store_->role_of(user);
  for (const auto& rule : system_->app().rights) {
    if (rule.role != role) continue;
    for (const auto& allowed : rule.allowed)
      if (same_entry(allowed, entry)) return true;
  }
  return false;
}

bool Access::may_start(std::string_view user, std::string_view activity) const {
  return permits(user, ActivityEntry{std::string(activity), {}});
}

bool Access::may_use_class(std::string_view user, std::string_view class_name) const {
  return permits(user, ClassEntry{std::string(class_name), CrudMode::List, {}});
}

std::vector<MenuEntry> Access::menu_for(std::string_view user) const {
  std::vector<MenuEntry> out;
  for (const auto& e : system_->app().menu)
    if (permits(user, e)) out.push_back(e);
  return out;
}

// ---------------------------------------------------------------- Engine

namespace {

ExecutionContext load_live(Store& store, std::string_view instance, std::optional<std::uint64_t> epoch) {
  ExecutionContext ctx;
  try {
    ctx = store.load_context(instance);
  } catch (const StoreError&) {
    if (store.was_finished(instance))
      throw EngineError(EngineErrorKind::Gone, "activity instance '" + std::string(instance) + "' has completed");
    throw EngineError(EngineErrorKind::NotFound, "no activity instance '" + std::string(instance) + "'");
  }
  if (epoch && *epoch != ctx.epoch)
    throw EngineError(EngineErrorKind::Gone, "this step of '" + std::string(instance) + "' is already over");
  return ctx;
}

void check_partition(const LinkedSystem& system, const ExecutionContext& ctx, const std::string& user) {
  const auto* act = system.find_activity(ctx.activity);
  const auto* partition = act ? act->partition_of(ctx.token.action) : nullptr;
  if (!partition) return;
  auto it = ctx.role_bindings.find(partition->name);
  if (it == ctx.role_bindings.end() || it->second != user)
    throw EngineError(EngineErrorKind::WrongUser,
                      "action " + ctx.token.action + " belongs to another participant (" + partition->name + ")");
}

Store::InstanceLock claim(Store& store, std::string_view instance) {
  try {
    return store.lock_instance(instance);
  } catch (const StoreError& e) {
    throw EngineError(EngineErrorKind::Conflict, e.what());
  }
}

}  // namespace

std::pair<ExecutionContext, NextStep> Engine::start_activity(std::string_view activity, const std::string& user) {
  if (!system_->find_activity(activity))
    throw EngineError(EngineErrorKind::NotFound, "unknown activity '" + std::string(activity) + "'");
  if (!Access(*system_, *store_).may_start(user, activity))
    throw EngineError(EngineErrorKind::Forbidden, "not allowed to start " + std::string(activity));
  ExecutionContext ctx;
  ctx.instance_id = store_->new_instance_id();
  ctx.activity = std::string(activity);
  ctx.started_by = user;
  auto lock = claim(*store_, ctx.instance_id);
  Step step(*system_, *store_, std::move(ctx), user);
  step.start();
  step.commit();
  return {step.ctx(), step.next()};
}

PageRender Engine::render_action(std::string_view instance, const std::string& user,
                                 std::optional<std::uint64_t> epoch) {
  auto lock = claim(*store_, instance);
  auto ctx = load_live(*store_, instance, epoch);
  check_partition(*system_, ctx, user);
  Step step(*system_, *store_, ctx, user);
  const ActionDef& action = *step.activity().find_action(ctx.token.action);
  if (!action.is_interactive()) throw EngineError(EngineErrorKind::ActionFailed, action.name + " has no view");
  if (ctx.token.phase == Phase::BeforeView) {
    step.run(action, 0, view_index(action));
    step.ctx().token.phase = Phase::AwaitingSubmit;
  }
  auto page = step.render(action);
  if (step.ctx() != ctx) step.commit();
  return page;
}

NextStep Engine::submit_action(std::string_view instance, const std::string& user, const Submission& submission,
                               std::optional<std::uint64_t> epoch) {
  auto lock = claim(*store_, instance);
  auto ctx = load_live(*store_, instance, epoch);
  check_partition(*system_, ctx, user);
  Step step(*system_, *store_, ctx, user);
  const ActionDef& action = *step.activity().find_action(ctx.token.action);
  if (!action.is_interactive()) throw EngineError(EngineErrorKind::ActionFailed, action.name + " has no view");
  const auto at = view_index(action);
  if (ctx.token.phase == Phase::BeforeView) step.run(action, 0, at);
  step.write_back(action, submission);
  step.run(action, at + 1, action.body.size());
  step.leave(action.name, submission.decision);
  step.commit();
  return step.next();
}

std::vector<Task> Engine::list_tasks(std::string_view user) const {
  std::vector<Task> out;
  for (const auto& ctx : store_->live_contexts()) {
    if (ctx.token.completed) continue;
    const auto* act = system_->find_activity(ctx.activity);
    const auto* partition = act ? act->partition_of(ctx.token.action) : nullptr;
    if (!partition) continue;
    auto it = ctx.role_bindings.find(partition->name);
    if (it != ctx.role_bindings.end() && it->second == user)
      out.push_back({ctx.instance_id, ctx.activity, ctx.token.action, ctx.epoch});
  }
  return out;
}

// ---------------------------------------------------------------- simulate

SimulationResult simulate(const LinkedSystem& system, Store& store, std::string_view activity, ChoiceScript script) {
  Engine engine(system, store);
  SimulationResult result;
  auto [ctx, next] = engine.start_activity(activity, script.starter);
  result.instance = ctx.instance_id;
  auto absorb = [&](const NextStep& n) {
    result.trace.insert(result.trace.end(), n.visited.begin(), n.visited.end());
    result.notifications.insert(result.notifications.end(), n.notifications.begin(), n.notifications.end());
  };
  absorb(next);
  for (int guard = 0; !next.finished; ++guard) {
    if (guard > kMaxAutomaticSteps) throw EngineError(EngineErrorKind::ScriptExhausted, "simulation does not end");
    const auto live = store.load_context(next.instance);
    const auto* act = system.find_activity(live.activity);
    const StepInput input = script.steps.count(next.action) ? script.steps.at(next.action) : StepInput{};
    std::string user = script.starter;
    if (input.user) {
      user = *input.user;
    } else if (const auto* p = act->partition_of(next.action); p && live.role_bindings.count(p->name)) {
      user = live.role_bindings.at(p->name);
    }
    const auto page = engine.render_action(next.instance, user);
    Submission sub;
    sub.form = input.form;
    sub.selection = input.selection;
    if (!sub.selection) {
      for (const auto& el : page.elements)
        if (el.at("kind") == "table" && el.at("selectable").get<bool>() && !el.at("rows").empty()) {
          sub.selection = el.at("rows").front().at("id").get<std::string>();
          break;
        }
    }
    if (!page.decisions.empty()) {
      if (script.decisions.empty())
        throw EngineError(EngineErrorKind::ScriptExhausted, "script exhausted at " + next.action);
      sub.decision = script.decisions.front();
      script.decisions.pop_front();
    }
    next = engine.submit_action(next.instance, user, sub);
    absorb(next);
  }
  return result;
}

}  // namespace wisflow
