#pragma once

#include <string>

#include "wisflow/ast.hpp"

namespace wisflow {

// Canonical text for each model kind. Output re-parses to a structurally
// equal AST.

std::string pretty_print(const ast::ClassModel& model);
std::string pretty_print(const ast::ActivityModel& model);
std::string pretty_print(const ast::PageModel& model);
std::string pretty_print(const ast::AppModel& model);

std::string print_expr(const ast::Expr& expr);
std::string print_script_stmt(const ast::ScriptStmt& stmt);
std::string print_guard(const ast::GuardExpr& guard);
std::string print_literal(const ast::Primitive& value);
std::string quote(std::string_view text);

}  // namespace wisflow
