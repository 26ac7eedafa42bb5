#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "wisflow/diagnostic.hpp"

namespace wisflow::syntax {

struct Token {
  enum class Kind { Identifier, String, Int, Decimal, Punct, End };

  Kind kind = Kind::End;
  std::string text;  // identifier/punct spelling, unescaped string contents, number spelling
  int line = 1;
  int column = 1;

  bool is(Kind k, std::string_view t) const { return kind == k && text == t; }
  bool is_punct(std::string_view t) const { return is(Kind::Punct, t); }
  bool is_word(std::string_view t) const { return is(Kind::Identifier, t); }
};

struct LexResult {
  std::vector<Token> tokens;  // always terminated by an End token
  std::vector<Diagnostic> diagnostics;
};

/// Splits model source into tokens. `//` comments and whitespace are
/// skipped. Operator characters outside the grammar (`+`, `*`, ...) are
/// still produced as Punct tokens so the parser can name them.
LexResult lex(std::string_view source, std::string_view file);

}  // namespace wisflow::syntax
