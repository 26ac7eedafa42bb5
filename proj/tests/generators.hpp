#pragma once

// Random generators for syntactically well-formed ASTs. Names are drawn
// from disjoint pools so every uniqueness rule of the grammar holds.

#include <algorithm>
#include <random>
#include <string>
#include <vector>

#include "wisflow/ast.hpp"

namespace wisflow::testing {

class AstGenerator {
 public:
  explicit AstGenerator(std::uint32_t seed) : rng_(seed) {}

  int uniform(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  bool coin(double p = 0.5) { return std::bernoulli_distribution(p)(rng_); }
  template <class T>
  const T& pick(const std::vector<T>& v) {
    return v[static_cast<size_t>(uniform(0, static_cast<int>(v.size()) - 1))];
  }

  std::string name(const std::string& prefix, int i) { return prefix + std::to_string(i); }

  ast::BuiltinType builtin() { return static_cast<ast::BuiltinType>(uniform(0, 6)); }

  ast::TypeRef type_ref() {
    switch (uniform(0, 2)) {
      case 0: return ast::TypeRef::of_class(name("C", uniform(0, 5)));
      case 1: return ast::TypeRef::set_of(name("C", uniform(0, 5)));
      default: return ast::TypeRef::of_builtin(builtin());
    }
  }

  std::string text() {
    static const std::vector<std::string> kTexts{"", "hello", "with \"quotes\"", "back\\slash", "tab\tand\nnewline",
                                                 "Grade // not a comment", "unicode \xc3\xa9t\xc3\xa9"};
    return pick(kTexts);
  }

  ast::ClassModel class_model() {
    ast::ClassModel m;
    m.name = name("Model", uniform(0, 9));
    const int n = uniform(0, 4);
    for (int i = 0; i < n; ++i) {
      ast::ClassDef c;
      c.name = name("C", i);
      c.is_user = coin(0.3);
      int member = 0;
      for (int a = uniform(0, 4); a > 0; --a) c.attributes.push_back({name("attr", member++), builtin(), {}});
      for (int a = uniform(0, 2); a > 0; --a)
        c.associations.push_back({name("role", member++), name("C", uniform(0, n)),
                                  coin() ? ast::Multiplicity::One : ast::Multiplicity::Many, {}});
      m.classes.push_back(std::move(c));
    }
    return m;
  }

  ast::Expr expr(const std::vector<std::string>& scope) {
    const std::string v = scope.empty() ? "x" : pick(scope);
    switch (uniform(0, 3)) {
      case 0: return {ast::VarRef{v}, {}};
      case 1: return {ast::NewObject{name("C", uniform(0, 5))}, {}};
      case 2: return {ast::Getter{v, name("attr", uniform(0, 4))}, {}};
      default: return {ast::FirstOf{v}, {}};
    }
  }

  ast::ScriptStmt script_stmt(const std::vector<std::string>& scope) {
    const std::string v = scope.empty() ? "x" : pick(scope);
    if (coin()) return {ast::Assign{v, expr(scope)}, {}};
    return {ast::Invoke{v, name("attr", uniform(0, 4)), expr(scope)}, {}};
  }

  ast::GuardExpr guard(int depth = 0) {
    ast::GuardExpr g;
    const int choice = depth > 2 ? uniform(0, 2) : uniform(0, 7);
    switch (choice) {
      case 0: {
        ast::Primitive lits[] = {std::monostate{}, true, false, std::int64_t{uniform(-50, 50)},
                                 uniform(-40, 40) / 4.0, text()};
        g.literal = lits[uniform(0, 5)];
        break;
      }
      case 1:
        g.kind = ast::GuardExpr::Kind::VarRef;
        g.name = name("v", uniform(0, 3));
        break;
      case 2:
        g.kind = ast::GuardExpr::Kind::Getter;
        g.name = name("v", uniform(0, 3));
        g.attr = name("attr", uniform(0, 3));
        break;
      case 3:
      case 4: {
        g.kind = choice == 3 ? ast::GuardExpr::Kind::Equal : ast::GuardExpr::Kind::NotEqual;
        g.operands = {guard(depth + 1), guard(depth + 1)};
        break;
      }
      case 5:
        g.kind = ast::GuardExpr::Kind::Not;
        g.operands = {guard(depth + 1)};
        break;
      default:
        g.kind = coin() ? ast::GuardExpr::Kind::And : ast::GuardExpr::Kind::Or;
        g.operands = {guard(depth + 1), guard(depth + 1)};
    }
    return g;
  }

  ast::ActivityModel activity() {
    ast::ActivityModel m;
    m.name = name("Act", uniform(0, 9));
    const int n = uniform(0, 6);
    std::vector<std::string> actions;
    for (int i = 0; i < n; ++i) actions.push_back(name("A", i));

    std::vector<std::string> unassigned = actions;
    for (int p = uniform(0, 2); p > 0; --p) {
      ast::Partition part{name("P", p), {}, {}};
      for (int k = uniform(0, 2); k > 0 && !unassigned.empty(); --k) {
        part.actions.push_back(unassigned.back());
        unassigned.pop_back();
      }
      m.partitions.push_back(std::move(part));
    }

    for (const auto& a : actions) {
      ast::ActionDef def;
      def.name = a;
      int decl = 0;
      std::vector<std::string> scope;
      auto add_decls = [&](std::vector<ast::ParamDecl>& list) {
        for (int k = uniform(0, 2); k > 0; --k) {
          list.push_back({type_ref(), name("v", decl++), {}});
          scope.push_back(list.back().name);
        }
      };
      add_decls(def.in_pins);
      add_decls(def.out_pins);
      add_decls(def.vars);
      bool has_view = false;
      for (int k = uniform(0, 4); k > 0; --k) {
        const std::string v = scope.empty() ? "x" : pick(scope);
        switch (uniform(0, 6)) {
          case 0: def.body.emplace_back(ast::CmdStmt{ast::LoadAll{v, name("C", uniform(0, 5))}, {}}); break;
          case 1: def.body.emplace_back(ast::CmdStmt{ast::GetActualUser{v}, {}}); break;
          case 2: def.body.emplace_back(ast::CmdStmt{ast::AssignRole{name("P", uniform(0, 2)), v}, {}}); break;
          case 3: def.body.emplace_back(ast::CmdStmt{ast::SaveCmd{v}, {}}); break;
          case 4: def.body.emplace_back(ast::CmdStmt{ast::Notify{text()}, {}}); break;
          case 5:
            if (!has_view) {
              has_view = true;
              ast::ViewStmt view{name("Page", uniform(0, 3)), {}, {}};
              for (int j = uniform(0, 2); j > 0; --j) view.args.push_back(v);
              def.body.emplace_back(std::move(view));
            }
            break;
          default: {
            ast::ScriptBlock block;
            for (int j = uniform(0, 3); j > 0; --j) block.statements.push_back(script_stmt(scope));
            def.body.emplace_back(std::move(block));
          }
        }
      }
      m.actions.push_back(std::move(def));
    }

    auto target_ref = [&](bool allow_final) {
      if (actions.empty() || (allow_final && coin(0.2))) return ast::NodeRef::final_node();
      auto ref = ast::NodeRef::to_action(pick(actions));
      if (coin()) ref.pin = name("v", uniform(0, 3));
      return ref;
    };
    if (coin(0.8)) m.edges.push_back({ast::NodeRef::initial(), {{target_ref(true), std::nullopt}}, {}});
    for (const auto& a : actions) {
      if (!coin(0.7)) continue;
      ast::EdgeDef e;
      e.source = ast::NodeRef::to_action(a);
      if (coin()) e.source.pin = name("v", uniform(0, 3));
      std::vector<std::string> used;
      for (int k = uniform(1, 3); k > 0; --k) {
        ast::EdgeTarget t{target_ref(true), std::nullopt};
        const std::string label = t.node.kind == ast::NodeRef::Kind::Final ? "final" : t.node.action;
        if (std::find(used.begin(), used.end(), label) != used.end()) continue;
        used.push_back(label);
        if (coin(0.3)) t.guard = guard();
        e.targets.push_back(std::move(t));
      }
      m.edges.push_back(std::move(e));
    }
    return m;
  }

  ast::PageModel page() {
    ast::PageModel m;
    m.name = name("Page", uniform(0, 9));
    for (int k = uniform(0, 3), i = 0; i < k; ++i) m.params.push_back({type_ref(), name("p", i), {}});
    for (int k = uniform(0, 5); k > 0; --k) {
      const std::string p = name("p", uniform(0, 3));
      switch (uniform(0, 4)) {
        case 0: m.elements.emplace_back(ast::Heading{uniform(1, 3), text(), {}}); break;
        case 1: m.elements.emplace_back(ast::Text{text(), {}}); break;
        case 2: {
          ast::Output o{p, std::nullopt, {}};
          if (coin()) o.attr = name("attr", uniform(0, 3));
          m.elements.emplace_back(std::move(o));
          break;
        }
        case 3: m.elements.emplace_back(ast::Input{p, name("attr", uniform(0, 3)), {}}); break;
        default: {
          ast::Table t{p, coin(), {}, {}};
          for (int c = uniform(0, 3); c > 0; --c) t.columns.push_back(name("attr", c));
          m.elements.emplace_back(std::move(t));
        }
      }
    }
    return m;
  }

  ast::MenuEntry menu_entry() {
    switch (uniform(0, 2)) {
      case 0: return ast::PageEntry{name("Page", uniform(0, 3)), {}};
      case 1: return ast::ActivityEntry{name("Act", uniform(0, 3)), {}};
      default: return ast::ClassEntry{name("C", uniform(0, 3)), coin() ? ast::CrudMode::List : ast::CrudMode::Create, {}};
    }
  }

  ast::AppModel app() {
    ast::AppModel m;
    m.name = name("App", uniform(0, 9));
    const int roles = uniform(0, 3);
    for (int i = 0; i < roles; ++i) m.roles.push_back(name("r", i));
    for (int k = uniform(0, 4); k > 0; --k) m.menu.push_back(menu_entry());
    for (int k = roles ? uniform(0, 3) : 0; k > 0; --k) {
      ast::RightRule rule{pick(m.roles), {}, {}};
      for (int j = uniform(0, 3); j > 0; --j) rule.allowed.push_back(menu_entry());
      m.rights.push_back(std::move(rule));
    }
    return m;
  }

 private:
  std::mt19937 rng_;
};

}  // namespace wisflow::testing
