#pragma once

#include <string_view>
#include <vector>

#include "wisflow/ast.hpp"
#include "wisflow/diagnostic.hpp"

namespace wisflow {

// All parsers are pure: the same source always yields the same AST or the
// same diagnostics. `file` only labels diagnostic locations.

Parsed<ast::ClassModel> parse_class_model(std::string_view source, std::string_view file = "<input>");
Parsed<ast::ActivityModel> parse_activity(std::string_view source, std::string_view file = "<input>");
Parsed<ast::PageModel> parse_page(std::string_view source, std::string_view file = "<input>");
Parsed<ast::AppModel> parse_app(std::string_view source, std::string_view file = "<input>");

/// Parses the statements between the braces of a `java : { ... }` block.
Parsed<std::vector<ast::ScriptStmt>> parse_script_block(std::string_view source,
                                                        std::string_view file = "<input>");

}  // namespace wisflow
