#include "wisflow/parser.hpp"

#include <charconv>
#include <map>
#include <set>
#include <stdexcept>
#include <string>

#include "lexer.hpp"

namespace wisflow {

using namespace ast;
using syntax::Token;

namespace {

struct SyntaxError : std::runtime_error {
  SyntaxError(std::string code, Token at, const std::string& message)
      : std::runtime_error(message), code(std::move(code)), token(std::move(at)) {}
  std::string code;
  Token token;
};

bool is_unsupported_keyword(std::string_view word) {
  static const std::set<std::string_view> kWords{"while", "for",   "do",    "if",    "else",
                                                 "switch", "return", "break", "continue",
                                                 "try",   "catch",  "throw"};
  return kWords.count(word) > 0;
}

bool is_arithmetic(const Token& t) {
  static const std::set<std::string_view> kOps{"+", "-", "*", "/", "%", "++", "--"};
  return t.kind == Token::Kind::Punct && kOps.count(t.text) > 0;
}

class Parser {
 public:
  Parser(std::vector<Token> tokens, std::string_view file) : tokens_(std::move(tokens)), file_(file) {}

  // -------------------------------------------------------------------------
  // Class models

  ClassModel class_model() {
    ClassModel model;
    model.loc = loc();
    expect_word("classdiagram");
    model.name = ident("class diagram name");
    expect_punct("{");
    while (!peek().is_punct("}")) model.classes.push_back(class_def());
    expect_punct("}");
    expect_end();
    return model;
  }

  ClassDef class_def() {
    ClassDef cls;
    cls.loc = loc();
    expect_word("class");
    cls.name = ident("class name");
    if (peek().is_punct("<")) {
      advance();
      expect_punct("<");
      expect_word("user");
      expect_punct(">");
      expect_punct(">");
      cls.is_user = true;
    }
    expect_punct("{");
    while (!peek().is_punct("}")) {
      if (peek().is_punct("->")) {
        AssociationDef assoc;
        assoc.loc = loc();
        advance();
        assoc.role = ident("association role");
        expect_punct(":");
        assoc.target = ident("association target class");
        const Token& m = peek();
        if (m.is_word("one")) {
          assoc.multiplicity = Multiplicity::One;
        } else if (m.is_word("many")) {
          assoc.multiplicity = Multiplicity::Many;
        } else {
          fail("syntax", m, "expected multiplicity 'one' or 'many'");
        }
        advance();
        expect_punct(";");
        cls.associations.push_back(std::move(assoc));
      } else {
        AttributeDef attr;
        attr.loc = loc();
        attr.name = ident("attribute name");
        expect_punct(":");
        const Token& t = peek();
        auto type = t.kind == Token::Kind::Identifier ? builtin_from_string(t.text) : std::nullopt;
        if (!type) fail("syntax", t, "unknown attribute type '" + t.text + "'");
        advance();
        attr.type = *type;
        expect_punct(";");
        cls.attributes.push_back(std::move(attr));
      }
    }
    expect_punct("}");
    return cls;
  }

  // -------------------------------------------------------------------------
  // Activities

  ActivityModel activity() {
    ActivityModel act;
    act.loc = loc();
    expect_word("activity");
    act.name = ident("activity name");
    expect_punct("{");
    while (!peek().is_punct("}")) {
      const Token& t = peek();
      if (t.is_word("role") && peek(1).kind == Token::Kind::Identifier) {
        act.partitions.push_back(partition());
      } else if (t.is_word("action") && peek(1).kind == Token::Kind::Identifier) {
        act.actions.push_back(action());
      } else if (t.kind == Token::Kind::Identifier) {
        act.edges.push_back(edge());
      } else {
        fail("syntax", t, "expected 'role', 'action' or an edge, found '" + describe(t) + "'");
      }
    }
    expect_punct("}");
    expect_end();
    return act;
  }

  Partition partition() {
    Partition p;
    p.loc = loc();
    expect_word("role");
    p.name = ident("partition name");
    expect_punct("{");
    if (!peek().is_punct("}")) {
      p.actions.push_back(ident("action name"));
      while (accept_punct(",")) p.actions.push_back(ident("action name"));
    }
    expect_punct("}");
    return p;
  }

  ActionDef action() {
    ActionDef a;
    a.loc = loc();
    expect_word("action");
    a.name = ident("action name");
    expect_punct("{");
    bool seen_statement = false;
    while (!peek().is_punct("}")) {
      const Token& t = peek();
      const bool keyword_form = t.kind == Token::Kind::Identifier && peek(1).is_punct(":");
      if (keyword_form && (t.text == "in" || t.text == "out" || t.text == "var")) {
        if (seen_statement) fail("syntax", t, "declarations must precede the statements of an action");
        auto& list = t.text == "in" ? a.in_pins : t.text == "out" ? a.out_pins : a.vars;
        advance();
        advance();
        list.push_back(param_decl());
        while (accept_punct(",")) list.push_back(param_decl());
        expect_punct(";");
      } else if (keyword_form && t.text == "cmd") {
        seen_statement = true;
        a.body.emplace_back(command());
      } else if (keyword_form && t.text == "view") {
        seen_statement = true;
        a.body.emplace_back(view());
      } else if (keyword_form && t.text == "java") {
        seen_statement = true;
        a.body.emplace_back(script_block());
      } else {
        fail("unknown-statement", t, "unknown statement '" + describe(t) + "' in action " + a.name);
      }
    }
    expect_punct("}");
    return a;
  }

  ParamDecl param_decl() {
    ParamDecl d;
    d.loc = loc();
    d.type = type_ref();
    d.name = ident("parameter name");
    return d;
  }

  TypeRef type_ref() {
    const Token& t = peek();
    if (t.is_word("Set") && peek(1).is_punct("<")) {
      advance();
      advance();
      std::string element = ident("set element class");
      expect_punct(">");
      return TypeRef::set_of(std::move(element));
    }
    if (t.kind == Token::Kind::Identifier) {
      if (auto builtin = builtin_from_string(t.text)) {
        advance();
        return TypeRef::of_builtin(*builtin);
      }
    }
    return TypeRef::of_class(ident("type name"));
  }

  CmdStmt command() {
    CmdStmt stmt;
    stmt.loc = loc();
    advance();  // cmd
    advance();  // :
    const Token& t = peek();
    if (t.kind != Token::Kind::Identifier) fail("unknown-command", t, "expected a command, found '" + describe(t) + "'");
    if (peek(1).is_punct("=")) {
      std::string target = ident("variable name");
      advance();  // =
      const Token& rhs = peek();
      if (rhs.is_word("getActualUser") && peek(1).is_punct("(")) {
        advance();
        expect_punct("(");
        expect_punct(")");
        stmt.command = GetActualUser{std::move(target)};
      } else if (rhs.kind == Token::Kind::Identifier && peek(1).is_punct(".") && peek(2).is_word("loadAll")) {
        std::string cls = ident("class name");
        advance();  // .
        advance();  // loadAll
        expect_punct("(");
        expect_punct(")");
        stmt.command = LoadAll{std::move(target), std::move(cls)};
      } else {
        fail("unknown-command", rhs, "unknown command '" + describe(rhs) + "'");
      }
    } else if (t.is_word("assignRole")) {
      advance();
      expect_punct("(");
      std::string partition = ident("partition name");
      expect_punct(",");
      std::string user = ident("user variable");
      expect_punct(")");
      stmt.command = AssignRole{std::move(partition), std::move(user)};
    } else if (t.is_word("save")) {
      advance();
      expect_punct("(");
      std::string target = ident("object variable");
      expect_punct(")");
      stmt.command = SaveCmd{std::move(target)};
    } else if (t.is_word("notify")) {
      advance();
      expect_punct("(");
      const Token& msg = peek();
      if (msg.kind != Token::Kind::String) fail("syntax", msg, "notify expects a string literal");
      std::string text = msg.text;
      advance();
      expect_punct(")");
      stmt.command = Notify{std::move(text)};
    } else {
      fail("unknown-command", t, "unknown command '" + t.text + "'");
    }
    accept_punct(";");
    return stmt;
  }

  ViewStmt view() {
    ViewStmt v;
    v.loc = loc();
    advance();  // view
    advance();  // :
    v.page = ident("page name");
    expect_punct("(");
    if (!peek().is_punct(")")) {
      v.args.push_back(ident("view argument"));
      while (accept_punct(",")) v.args.push_back(ident("view argument"));
    }
    expect_punct(")");
    accept_punct(";");
    return v;
  }

  ScriptBlock script_block() {
    ScriptBlock block;
    block.loc = loc();
    advance();  // java
    advance();  // :
    expect_punct("{");
    while (!peek().is_punct("}")) {
      if (peek().kind == Token::Kind::End) fail("syntax", peek(), "unterminated script block");
      block.statements.push_back(script_stmt());
    }
    expect_punct("}");
    accept_punct(";");
    return block;
  }

  std::vector<ScriptStmt> script_only() {
    std::vector<ScriptStmt> out;
    while (peek().kind != Token::Kind::End) out.push_back(script_stmt());
    return out;
  }

  ScriptStmt script_stmt() {
    ScriptStmt stmt;
    stmt.loc = loc();
    const Token& t = peek();
    reject_unsupported(t);
    if (t.kind != Token::Kind::Identifier) fail("unknown-statement", t, "unknown script statement starting with '" + describe(t) + "'");
    std::string name = ident("variable name");
    if (accept_punct("=")) {
      Expr rhs = expr();
      stmt.node = Assign{std::move(name), std::move(rhs)};
    } else if (peek().is_punct(".")) {
      advance();
      const Token& method = peek();
      if (method.kind != Token::Kind::Identifier || method.text.size() <= 3 || method.text.rfind("set", 0) != 0)
        fail("unsupported-construct", method, "method call '" + describe(method) + "' is not supported; only setX(...) may be invoked");
      std::string attr = decapitalize(std::string_view(method.text).substr(3));
      advance();
      expect_punct("(");
      Expr arg = expr();
      expect_punct(")");
      stmt.node = Invoke{std::move(name), std::move(attr), std::move(arg)};
    } else {
      reject_unsupported(peek());
      fail("unknown-statement", peek(), "expected '=' or a setter call after '" + name + "'");
    }
    reject_unsupported(peek());
    expect_punct(";");
    return stmt;
  }

  Expr expr() {
    Expr e;
    e.loc = loc();
    const Token& t = peek();
    reject_unsupported(t);
    if (t.kind == Token::Kind::String || t.kind == Token::Kind::Int || t.kind == Token::Kind::Decimal ||
        t.is_word("true") || t.is_word("false") || t.is_word("null"))
      fail("unsupported-construct", t, "literal values are not supported in script blocks");
    if (t.is_word("new")) {
      advance();
      std::string cls = ident("class name");
      expect_punct("(");
      expect_punct(")");
      e.node = NewObject{std::move(cls)};
    } else {
      std::string receiver = ident("variable name");
      if (accept_punct(".")) {
        const Token& method = peek();
        if (method.is_word("iterator")) {
          advance();
          expect_punct("(");
          expect_punct(")");
          expect_punct(".");
          expect_word("next");
          expect_punct("(");
          expect_punct(")");
          e.node = FirstOf{std::move(receiver)};
        } else if (method.kind == Token::Kind::Identifier && method.text.size() > 3 && method.text.rfind("get", 0) == 0) {
          std::string attr = decapitalize(std::string_view(method.text).substr(3));
          advance();
          expect_punct("(");
          expect_punct(")");
          e.node = Getter{std::move(receiver), std::move(attr)};
        } else {
          fail("unsupported-construct", method, "method call '" + describe(method) + "' is not supported");
        }
      } else {
        e.node = VarRef{std::move(receiver)};
      }
    }
    reject_unsupported(peek());
    return e;
  }

  void reject_unsupported(const Token& t) {
    if (t.kind == Token::Kind::Identifier && is_unsupported_keyword(t.text))
      fail("unsupported-construct", t, "'" + t.text + "' is not supported in script blocks");
    if (is_arithmetic(t)) fail("unsupported-construct", t, "arithmetic operator '" + t.text + "' is not supported in script blocks");
  }

  EdgeDef edge() {
    EdgeDef e;
    e.loc = loc();
    const Token& s = peek();
    if (s.is_word("final")) fail("malformed-edge", s, "'final' cannot be the source of an edge");
    if (s.is_word("initial")) {
      e.source = NodeRef::initial();
      e.source.loc = loc();
      advance();
    } else {
      e.source = action_ref();
    }
    if (!peek().is_punct("->")) fail("malformed-edge", peek(), "expected '->' in edge, found '" + describe(peek()) + "'");
    advance();
    e.targets.push_back(edge_target());
    while (accept_punct("|")) e.targets.push_back(edge_target());
    if (!peek().is_punct(";")) fail("malformed-edge", peek(), "expected ';' after edge, found '" + describe(peek()) + "'");
    advance();
    return e;
  }

  EdgeTarget edge_target() {
    EdgeTarget target;
    if (accept_punct("[")) {
      target.guard = guard_or();
      expect_punct("]");
    }
    const Token& t = peek();
    if (t.is_word("initial")) fail("malformed-edge", t, "'initial' cannot be the target of an edge");
    if (t.is_word("final")) {
      target.node = NodeRef::final_node();
      target.node.loc = loc();
      advance();
    } else if (t.kind == Token::Kind::Identifier) {
      target.node = action_ref();
    } else {
      fail("malformed-edge", t, "expected an edge target, found '" + describe(t) + "'");
    }
    return target;
  }

  NodeRef action_ref() {
    NodeRef ref = NodeRef::to_action({});
    ref.loc = loc();
    const Token& t = peek();
    if (t.kind != Token::Kind::Identifier || is_reserved_word(t.text))
      fail("malformed-edge", t, "expected an action name, found '" + describe(t) + "'");
    ref.action = t.text;
    advance();
    if (accept_punct(".")) {
      const Token& p = peek();
      if (p.kind != Token::Kind::Identifier || is_reserved_word(p.text))
        fail("malformed-edge", p, "expected a pin name, found '" + describe(p) + "'");
      ref.pin = p.text;
      advance();
    }
    return ref;
  }

  GuardExpr guard_or() {
    GuardExpr lhs = guard_and();
    while (peek().is_punct("||")) {
      GuardExpr node;
      node.loc = loc();
      advance();
      node.kind = GuardExpr::Kind::Or;
      node.operands.push_back(std::move(lhs));
      node.operands.push_back(guard_and());
      lhs = std::move(node);
    }
    return lhs;
  }

  GuardExpr guard_and() {
    GuardExpr lhs = guard_unary();
    while (peek().is_punct("&&")) {
      GuardExpr node;
      node.loc = loc();
      advance();
      node.kind = GuardExpr::Kind::And;
      node.operands.push_back(std::move(lhs));
      node.operands.push_back(guard_unary());
      lhs = std::move(node);
    }
    return lhs;
  }

  GuardExpr guard_unary() {
    if (peek().is_punct("!")) {
      GuardExpr node;
      node.loc = loc();
      advance();
      node.kind = GuardExpr::Kind::Not;
      node.operands.push_back(guard_unary());
      return node;
    }
    GuardExpr lhs = guard_primary();
    if (peek().is_punct("==") || peek().is_punct("!=")) {
      GuardExpr node;
      node.loc = loc();
      node.kind = peek().text == "==" ? GuardExpr::Kind::Equal : GuardExpr::Kind::NotEqual;
      advance();
      node.operands.push_back(std::move(lhs));
      node.operands.push_back(guard_primary());
      return node;
    }
    return lhs;
  }

  GuardExpr guard_primary() {
    GuardExpr g;
    g.loc = loc();
    const Token& t = peek();
    if (accept_punct("(")) {
      g = guard_or();
      expect_punct(")");
      return g;
    }
    switch (t.kind) {
      case Token::Kind::String:
        g.literal = t.text;
        advance();
        return g;
      case Token::Kind::Int: {
        std::int64_t v = 0;
        auto [p, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
        if (ec != std::errc{}) fail("syntax", t, "integer literal out of range");
        g.literal = v;
        advance();
        return g;
      }
      case Token::Kind::Decimal: {
        double v = 0;
        std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
        g.literal = v;
        advance();
        return g;
      }
      default:
        break;
    }
    if (t.is_word("true") || t.is_word("false")) {
      g.literal = t.text == "true";
      advance();
      return g;
    }
    if (t.is_word("null")) {
      g.literal = std::monostate{};
      advance();
      return g;
    }
    g.name = ident("guard operand");
    if (accept_punct(".")) {
      const Token& m = peek();
      if (m.kind != Token::Kind::Identifier || m.text.size() <= 3 || m.text.rfind("get", 0) != 0)
        fail("syntax", m, "guards may only call getters, found '" + describe(m) + "'");
      g.kind = GuardExpr::Kind::Getter;
      g.attr = decapitalize(std::string_view(m.text).substr(3));
      advance();
      expect_punct("(");
      expect_punct(")");
    } else {
      g.kind = GuardExpr::Kind::VarRef;
    }
    return g;
  }

  // -------------------------------------------------------------------------
  // Pages

  PageModel page() {
    PageModel p;
    p.loc = loc();
    expect_word("page");
    p.name = ident("page name");
    expect_punct("(");
    if (!peek().is_punct(")")) {
      p.params.push_back(param_decl());
      while (accept_punct(",")) p.params.push_back(param_decl());
    }
    expect_punct(")");
    expect_punct("{");
    while (!peek().is_punct("}")) p.elements.push_back(page_element());
    expect_punct("}");
    expect_end();
    return p;
  }

  PageElement page_element() {
    const Loc at = loc();
    const Token& t = peek();
    if (t.is_word("heading")) {
      advance();
      const Token& level = peek();
      if (level.kind != Token::Kind::Int || (level.text != "1" && level.text != "2" && level.text != "3"))
        fail("syntax", level, "heading level must be 1, 2 or 3");
      const int lvl = level.text[0] - '0';
      advance();
      std::string text = string_literal();
      expect_punct(";");
      return Heading{lvl, std::move(text), at};
    }
    if (t.is_word("text")) {
      advance();
      std::string text = string_literal();
      expect_punct(";");
      return Text{std::move(text), at};
    }
    if (t.is_word("output")) {
      advance();
      Output out{ident("page parameter"), std::nullopt, at};
      if (accept_punct(".")) out.attr = ident("attribute name");
      expect_punct(";");
      return out;
    }
    if (t.is_word("input")) {
      advance();
      Input in{ident("page parameter"), {}, at};
      expect_punct(".");
      in.attr = ident("attribute name");
      expect_punct(";");
      return in;
    }
    if (t.is_word("table")) {
      advance();
      Table table{ident("page parameter"), false, {}, at};
      if (peek().is_word("selectable")) {
        advance();
        table.selectable = true;
      }
      expect_punct("{");
      if (!peek().is_punct("}")) {
        table.columns.push_back(ident("column attribute"));
        while (accept_punct(",")) table.columns.push_back(ident("column attribute"));
      }
      expect_punct("}");
      accept_punct(";");
      return table;
    }
    fail("syntax", t, "unknown page element '" + describe(t) + "'");
  }

  // -------------------------------------------------------------------------
  // Applications

  AppModel app() {
    AppModel a;
    a.loc = loc();
    expect_word("application");
    a.name = ident("application name");
    expect_punct("{");
    while (!peek().is_punct("}")) {
      const Token& t = peek();
      if (t.is_word("roles")) {
        advance();
        role_names_.push_back(loc());
        a.roles.push_back(ident("role name"));
        while (accept_punct(",")) {
          role_names_.push_back(loc());
          a.roles.push_back(ident("role name"));
        }
        expect_punct(";");
      } else if (t.is_word("menu")) {
        advance();
        expect_punct("{");
        while (!peek().is_punct("}")) a.menu.push_back(menu_entry());
        expect_punct("}");
      } else if (t.is_word("rights")) {
        RightRule rule;
        rule.loc = loc();
        advance();
        rule.role = ident("role name");
        expect_punct("{");
        while (!peek().is_punct("}")) rule.allowed.push_back(menu_entry());
        expect_punct("}");
        a.rights.push_back(std::move(rule));
      } else {
        fail("syntax", t, "expected 'roles', 'menu' or 'rights', found '" + describe(t) + "'");
      }
    }
    expect_punct("}");
    expect_end();
    return a;
  }

  MenuEntry menu_entry() {
    const Loc at = loc();
    const Token& t = peek();
    MenuEntry entry;
    if (t.is_word("page")) {
      advance();
      entry = PageEntry{ident("page name"), at};
    } else if (t.is_word("activity")) {
      advance();
      entry = ActivityEntry{ident("activity name"), at};
    } else if (t.is_word("class")) {
      advance();
      ClassEntry c{ident("class name"), CrudMode::List, at};
      const Token& m = peek();
      if (m.is_word("list")) {
        c.mode = CrudMode::List;
      } else if (m.is_word("create")) {
        c.mode = CrudMode::Create;
      } else {
        fail("syntax", m, "expected 'list' or 'create', found '" + describe(m) + "'");
      }
      advance();
      entry = std::move(c);
    } else {
      fail("syntax", t, "expected 'page', 'activity' or 'class', found '" + describe(t) + "'");
    }
    expect_punct(";");
    return entry;
  }

  const std::vector<Loc>& role_locations() const { return role_names_; }
  std::string_view file() const { return file_; }

  [[noreturn]] void fail(std::string code, const Token& at, const std::string& message) {
    throw SyntaxError(std::move(code), at, message);
  }

 private:
  const Token& peek(size_t offset = 0) const {
    const size_t i = std::min(pos_ + offset, tokens_.size() - 1);
    return tokens_[i];
  }
  void advance() {
    if (pos_ + 1 < tokens_.size()) ++pos_;
  }
  Loc loc() const { return {peek().line, peek().column}; }

  static std::string describe(const Token& t) {
    switch (t.kind) {
      case Token::Kind::End:
        return "end of input";
      case Token::Kind::String:
        return "\"" + t.text + "\"";
      default:
        return t.text;
    }
  }

  bool accept_punct(std::string_view p) {
    if (!peek().is_punct(p)) return false;
    advance();
    return true;
  }
  void expect_punct(std::string_view p) {
    if (!peek().is_punct(p)) fail("syntax", peek(), "expected '" + std::string(p) + "', found '" + describe(peek()) + "'");
    advance();
  }
  void expect_word(std::string_view w) {
    if (!peek().is_word(w)) fail("syntax", peek(), "expected '" + std::string(w) + "', found '" + describe(peek()) + "'");
    advance();
  }
  void expect_end() {
    if (peek().kind != Token::Kind::End) fail("syntax", peek(), "unexpected '" + describe(peek()) + "' after model");
  }
  std::string ident(std::string_view what) {
    const Token& t = peek();
    if (t.kind != Token::Kind::Identifier) fail("syntax", t, "expected " + std::string(what) + ", found '" + describe(t) + "'");
    if (is_reserved_word(t.text)) fail("reserved-word", t, "'" + t.text + "' is reserved and cannot be used as " + std::string(what));
    std::string name = t.text;
    advance();
    return name;
  }
  std::string string_literal() {
    const Token& t = peek();
    if (t.kind != Token::Kind::String) fail("syntax", t, "expected a string literal, found '" + describe(t) + "'");
    std::string text = t.text;
    advance();
    return text;
  }

  std::vector<Token> tokens_;
  std::string_view file_;
  size_t pos_ = 0;
  std::vector<Loc> role_names_;
};

// ---------------------------------------------------------------------------
// Post-parse well-formedness checks local to one model

class Checker {
 public:
  explicit Checker(std::string_view file) : file_(file) {}

  void error(const Loc& at, std::string code, std::string message) {
    out.push_back({Severity::Error, {std::string(file_), at.line, at.column}, std::move(code), std::move(message)});
  }

  template <class Items, class NameOf, class LocOf>
  void unique(const Items& items, NameOf name_of, LocOf loc_of, const std::string& code, const std::string& what) {
    std::set<std::string> seen;
    for (const auto& item : items) {
      const std::string& n = name_of(item);
      if (!seen.insert(n).second) error(loc_of(item), code, "duplicate " + what + " '" + n + "'");
    }
  }

  std::vector<Diagnostic> out;

 private:
  std::string_view file_;
};

void check(const ClassModel& m, Checker& c) {
  c.unique(m.classes, [](const ClassDef& d) -> const std::string& { return d.name; },
           [](const ClassDef& d) { return d.loc; }, "duplicate-class", "class");
  for (const auto& cls : m.classes) {
    std::set<std::string> members;
    for (const auto& a : cls.attributes)
      if (!members.insert(a.name).second) c.error(a.loc, "duplicate-member", "duplicate member '" + a.name + "' in class " + cls.name);
    for (const auto& a : cls.associations)
      if (!members.insert(a.role).second) c.error(a.loc, "duplicate-member", "duplicate member '" + a.role + "' in class " + cls.name);
  }
}

void check(const ActivityModel& m, Checker& c) {
  c.unique(m.actions, [](const ActionDef& a) -> const std::string& { return a.name; },
           [](const ActionDef& a) { return a.loc; }, "duplicate-action", "action");
  c.unique(m.partitions, [](const Partition& p) -> const std::string& { return p.name; },
           [](const Partition& p) { return p.loc; }, "duplicate-partition", "partition");

  std::map<std::string, std::string> owner;
  for (const auto& p : m.partitions) {
    for (const auto& a : p.actions) {
      if (!m.find_action(a)) c.error(p.loc, "unknown-action", "partition " + p.name + " lists undeclared action '" + a + "'");
      auto [it, inserted] = owner.emplace(a, p.name);
      if (!inserted)
        c.error(p.loc, "partition-overlap", "action '" + a + "' is listed in partitions " + it->second + " and " + p.name);
    }
  }

  for (const auto& a : m.actions) {
    std::set<std::string> names;
    for (const auto* list : {&a.in_pins, &a.out_pins, &a.vars})
      for (const auto& d : *list)
        if (!names.insert(d.name).second) c.error(d.loc, "duplicate-name", "duplicate pin or variable '" + d.name + "' in action " + a.name);
    int views = 0;
    for (const auto& s : a.body)
      if (const auto* v = std::get_if<ViewStmt>(&s); v && ++views == 2)
        c.error(v->loc, "multiple-views", "action " + a.name + " contains more than one view statement");
  }

  int initial_edges = 0;
  std::set<std::string> sources;
  for (const auto& e : m.edges) {
    if (e.source.kind == NodeRef::Kind::Initial && ++initial_edges == 2)
      c.error(e.loc, "initial-edge", "activity " + m.name + " has more than one edge from 'initial'");
    if (e.source.kind == NodeRef::Kind::Action) {
      if (!m.find_action(e.source.action))
        c.error(e.source.loc, "unknown-action", "edge source '" + e.source.action + "' is not a declared action");
      if (!sources.insert(e.source.action).second)
        c.error(e.loc, "multiple-outgoing", "action '" + e.source.action + "' already has an outgoing edge; use '|' for alternatives");
    }
    std::set<std::string> labels;
    for (const auto& t : e.targets) {
      const std::string label = t.node.kind == NodeRef::Kind::Final ? "final" : t.node.action;
      if (t.node.kind == NodeRef::Kind::Action && !m.find_action(t.node.action))
        c.error(t.node.loc, "unknown-action", "edge target '" + t.node.action + "' is not a declared action");
      if (!labels.insert(label).second)
        c.error(t.node.loc, "malformed-edge", "decision lists target '" + label + "' more than once");
    }
  }
}

void check(const PageModel& m, Checker& c) {
  c.unique(m.params, [](const ParamDecl& p) -> const std::string& { return p.name; },
           [](const ParamDecl& p) { return p.loc; }, "duplicate-param", "page parameter");
}

void check(const AppModel& m, const std::vector<Loc>& role_locs, Checker& c) {
  std::set<std::string> roles;
  for (size_t i = 0; i < m.roles.size(); ++i)
    if (!roles.insert(m.roles[i]).second)
      c.error(i < role_locs.size() ? role_locs[i] : m.loc, "duplicate-role", "duplicate role '" + m.roles[i] + "'");
  for (const auto& r : m.rights)
    if (!roles.count(r.role)) c.error(r.loc, "unknown-role", "rights rule names undeclared role '" + r.role + "'");
}

template <class T, class Run>
Parsed<T> run_parser(std::string_view source, std::string_view file, Run run) {
  Parsed<T> result;
  auto lexed = syntax::lex(source, file);
  if (!lexed.diagnostics.empty()) {
    result.diagnostics = std::move(lexed.diagnostics);
    return result;
  }
  Parser parser(std::move(lexed.tokens), file);
  Checker checker(file);
  try {
    T value = run(parser, checker);
    result.diagnostics = std::move(checker.out);
    if (!has_errors(result.diagnostics)) result.value = std::move(value);
  } catch (const SyntaxError& e) {
    result.diagnostics.push_back(
        {Severity::Error, {std::string(file), e.token.line, e.token.column}, e.code, e.what()});
  }
  return result;
}

}  // namespace

Parsed<ClassModel> parse_class_model(std::string_view source, std::string_view file) {
  return run_parser<ClassModel>(source, file, [](Parser& p, Checker& c) {
    auto m = p.class_model();
    check(m, c);
    return m;
  });
}

Parsed<ActivityModel> parse_activity(std::string_view source, std::string_view file) {
  return run_parser<ActivityModel>(source, file, [](Parser& p, Checker& c) {
    auto m = p.activity();
    check(m, c);
    return m;
  });
}

Parsed<PageModel> parse_page(std::string_view source, std::string_view file) {
  return run_parser<PageModel>(source, file, [](Parser& p, Checker& c) {
    auto m = p.page();
    check(m, c);
    return m;
  });
}

Parsed<AppModel> parse_app(std::string_view source, std::string_view file) {
  return run_parser<AppModel>(source, file, [](Parser& p, Checker& c) {
    auto m = p.app();
    check(m, p.role_locations(), c);
    return m;
  });
}

Parsed<std::vector<ScriptStmt>> parse_script_block(std::string_view source, std::string_view file) {
  return run_parser<std::vector<ScriptStmt>>(source, file, [](Parser& p, Checker&) { return p.script_only(); });
}

}  // namespace wisflow
