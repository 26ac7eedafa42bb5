#include "lexer.hpp"

#include <array>
#include <cctype>

namespace wisflow::syntax {

namespace {

bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool is_ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }
bool is_digit(char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; }

constexpr std::array<std::string_view, 7> kTwoCharPunct{"->", "==", "!=", "&&", "||", "++", "--"};
constexpr std::string_view kOneCharPunct = "{}()[]<>,;:.|=!+-*/%";

class Lexer {
 public:
  Lexer(std::string_view src, std::string_view file) : src_(src), file_(file) {}

  LexResult run() {
    LexResult out;
    while (true) {
      skip_trivia();
      if (pos_ >= src_.size()) break;
      const int line = line_, col = col_;
      const char c = src_[pos_];
      if (is_ident_start(c)) {
        const size_t start = pos_;
        while (pos_ < src_.size() && is_ident_char(src_[pos_])) advance();
        out.tokens.push_back({Token::Kind::Identifier, std::string(src_.substr(start, pos_ - start)), line, col});
      } else if (is_digit(c) || (c == '-' && peek_is_digit(1))) {
        lex_number(out, line, col);
      } else if (c == '"') {
        lex_string(out, line, col);
      } else {
        const std::string_view two = src_.substr(pos_, 2);
        bool matched = false;
        for (auto p : kTwoCharPunct) {
          if (two == p) {
            advance();
            advance();
            out.tokens.push_back({Token::Kind::Punct, std::string(p), line, col});
            matched = true;
            break;
          }
        }
        if (matched) continue;
        if (kOneCharPunct.find(c) != std::string_view::npos) {
          advance();
          out.tokens.push_back({Token::Kind::Punct, std::string(1, c), line, col});
        } else {
          error(out, line, col, std::string("unexpected character '") + printable(c) + "'");
          advance();
        }
      }
    }
    out.tokens.push_back({Token::Kind::End, "", line_, col_});
    return out;
  }

 private:
  static std::string printable(char c) {
    const auto u = static_cast<unsigned char>(c);
    if (u >= 0x20 && u < 0x7f) return std::string(1, c);
    static constexpr char kHex[] = "0123456789abcdef";
    return std::string("\\x") + kHex[u >> 4] + kHex[u & 0xf];
  }

  bool peek_is_digit(size_t offset) const {
    return pos_ + offset < src_.size() && is_digit(src_[pos_ + offset]);
  }

  void advance() {
    if (src_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }

  void skip_trivia() {
    while (pos_ < src_.size()) {
      const char c = src_[pos_];
      if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
        advance();
      } else if (c == '/' && pos_ + 1 < src_.size() && src_[pos_ + 1] == '/') {
        while (pos_ < src_.size() && src_[pos_] != '\n') advance();
      } else {
        break;
      }
    }
  }

  void lex_number(LexResult& out, int line, int col) {
    const size_t start = pos_;
    if (src_[pos_] == '-') advance();
    while (peek_is_digit(0)) advance();
    bool decimal = false;
    if (pos_ < src_.size() && src_[pos_] == '.' && peek_is_digit(1)) {
      decimal = true;
      advance();
      while (peek_is_digit(0)) advance();
    }
    out.tokens.push_back({decimal ? Token::Kind::Decimal : Token::Kind::Int,
                          std::string(src_.substr(start, pos_ - start)), line, col});
  }

  void lex_string(LexResult& out, int line, int col) {
    advance();  // opening quote
    std::string value;
    while (true) {
      if (pos_ >= src_.size() || src_[pos_] == '\n') {
        error(out, line, col, "unterminated string literal");
        return;
      }
      const char c = src_[pos_];
      if (c == '"') {
        advance();
        break;
      }
      if (c == '\\') {
        advance();
        if (pos_ >= src_.size()) continue;
        const char e = src_[pos_];
        switch (e) {
          case 'n': value += '\n'; break;
          case 't': value += '\t'; break;
          case '"': value += '"'; break;
          case '\\': value += '\\'; break;
          default:
            error(out, line_, col_, std::string("unknown escape sequence '\\") + printable(e) + "'");
            value += e;
        }
        advance();
        continue;
      }
      value += c;
      advance();
    }
    out.tokens.push_back({Token::Kind::String, std::move(value), line, col});
  }

  void error(LexResult& out, int line, int col, std::string message) {
    out.diagnostics.push_back({Severity::Error, {std::string(file_), line, col}, "lexical", std::move(message)});
  }

  std::string_view src_;
  std::string_view file_;
  size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
};

}  // namespace

LexResult lex(std::string_view source, std::string_view file) { return Lexer(source, file).run(); }

}  // namespace wisflow::syntax
