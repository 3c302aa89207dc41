#include <cctype>
#include <optional>

#include "orch/dsl/logic.hpp"

namespace orch::dsl {

namespace {

enum class Tok { word, string, eq, ne, arrow, lparen, rparen, lbrace, rbrace, comma, semicolon, end };

struct Token {
  Tok kind = Tok::end;
  std::string text;
  SourcePos pos;
};

bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.'; }

bool is_keyword(std::string_view w) {
  return w == "when" || w == "default" || w == "and" || w == "or" || w == "not" || w == "in" ||
         w == "is_unknown";
}

[[noreturn]] void syntax(SourcePos pos, std::string subject, std::string message) {
  throw LogicError(Diagnostic{ErrorCode::syntax_error, pos, std::move(subject), std::move(message)});
}

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    for (;;) {
      skip_space_and_comments();
      SourcePos pos{line_, col_};
      if (i_ >= src_.size()) {
        out.push_back(Token{Tok::end, "", pos});
        return out;
      }
      char c = src_[i_];
      if (c == '"') {
        out.push_back(Token{Tok::string, read_string(pos), pos});
        continue;
      }
      if (is_word_char(c)) {
        std::string w;
        while (i_ < src_.size() && is_word_char(src_[i_])) w.push_back(advance());
        out.push_back(Token{Tok::word, std::move(w), pos});
        continue;
      }
      auto two = src_.substr(i_, 2);
      if (two == "==" || two == "!=" || two == "->") {
        advance();
        advance();
        out.push_back(Token{two == "==" ? Tok::eq : two == "!=" ? Tok::ne : Tok::arrow, std::string(two), pos});
        continue;
      }
      Tok kind;
      switch (c) {
        case '(': kind = Tok::lparen; break;
        case ')': kind = Tok::rparen; break;
        case '{': kind = Tok::lbrace; break;
        case '}': kind = Tok::rbrace; break;
        case ',': kind = Tok::comma; break;
        case ';': kind = Tok::semicolon; break;
        default: syntax(pos, std::string(1, c), "unexpected character");
      }
      advance();
      out.push_back(Token{kind, std::string(1, c), pos});
    }
  }

 private:
  char advance() {
    char c = src_[i_++];
    if (c == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    return c;
  }

  void skip_space_and_comments() {
    while (i_ < src_.size()) {
      char c = src_[i_];
      if (std::isspace(static_cast<unsigned char>(c))) {
        advance();
      } else if (c == '#') {
        while (i_ < src_.size() && src_[i_] != '\n') advance();
      } else {
        break;
      }
    }
  }

  std::string read_string(SourcePos start) {
    advance();  // opening quote
    std::string out;
    while (i_ < src_.size()) {
      char c = advance();
      if (c == '"') return out;
      if (c == '\n') syntax(start, out, "unterminated string literal");
      if (c == '\\') {
        if (i_ >= src_.size()) break;
        char e = advance();
        if (e != '"' && e != '\\') syntax(SourcePos{line_, col_ - 1}, std::string(1, e), "unsupported escape");
        out.push_back(e);
      } else {
        out.push_back(c);
      }
    }
    syntax(start, out, "unterminated string literal");
  }

  std::string_view src_;
  std::size_t i_ = 0;
  int line_ = 1;
  int col_ = 1;
};

class Parser {
 public:
  explicit Parser(std::vector<Token> toks) : toks_(std::move(toks)) {}

  Program run() {
    Program prog;
    skip_semicolons();
    while (!at(Tok::end)) {
      const Token& t = peek();
      if (is_word(t, "when")) {
        ++pos_;
        ProgramRule rule;
        rule.pos = t.pos;
        rule.condition = parse_or();
        expect(Tok::arrow, "'->'");
        rule.label_pos = peek().pos;
        rule.label = parse_label();
        prog.rules.push_back(std::move(rule));
      } else if (is_word(t, "default")) {
        ++pos_;
        prog.default_pos = t.pos;
        expect(Tok::arrow, "'->'");
        prog.default_label = parse_label();
        if (prog.default_label.empty()) syntax(prog.default_pos, "default", "empty default label");
        skip_semicolons();
        if (!at(Tok::end)) syntax(peek().pos, peek().text, "'default' must be the last rule");
        break;
      } else {
        syntax(t.pos, t.text, "expected 'when' or 'default'");
      }
      skip_semicolons();
    }
    prog.end_pos = peek().pos;
    return prog;
  }

 private:
  const Token& peek() const { return toks_[pos_]; }
  bool at(Tok k) const { return peek().kind == k; }
  static bool is_word(const Token& t, std::string_view w) { return t.kind == Tok::word && t.text == w; }

  void skip_semicolons() {
    while (at(Tok::semicolon)) ++pos_;
  }

  const Token& expect(Tok k, std::string_view what) {
    if (!at(k)) syntax(peek().pos, peek().text, "expected " + std::string(what));
    return toks_[pos_++];
  }

  Expr parse_or() {
    Expr first = parse_and();
    if (!is_word(peek(), "or")) return first;
    Expr e;
    e.kind = Expr::Kind::any_of;
    e.pos = first.pos;
    e.operands.push_back(std::move(first));
    while (is_word(peek(), "or")) {
      ++pos_;
      e.operands.push_back(parse_and());
    }
    return e;
  }

  Expr parse_and() {
    Expr first = parse_not();
    if (!is_word(peek(), "and")) return first;
    Expr e;
    e.kind = Expr::Kind::all_of;
    e.pos = first.pos;
    e.operands.push_back(std::move(first));
    while (is_word(peek(), "and")) {
      ++pos_;
      e.operands.push_back(parse_not());
    }
    return e;
  }

  Expr parse_not() {
    if (is_word(peek(), "not")) {
      Expr e;
      e.kind = Expr::Kind::negate;
      e.pos = peek().pos;
      ++pos_;
      e.operands.push_back(parse_not());
      return e;
    }
    return parse_primary();
  }

  Expr parse_primary() {
    const Token& t = peek();
    if (t.kind == Tok::lparen) {
      ++pos_;
      Expr inner = parse_or();
      expect(Tok::rparen, "')'");
      return inner;
    }
    if (is_word(t, "is_unknown")) {
      ++pos_;
      expect(Tok::lparen, "'(' after is_unknown");
      Expr e;
      e.kind = Expr::Kind::is_unknown;
      e.pos = peek().pos;
      e.field = parse_field();
      expect(Tok::rparen, "')'");
      return e;
    }
    Expr e;
    e.pos = t.pos;
    e.field = parse_field();
    const Token& op = peek();
    if (op.kind == Tok::eq || op.kind == Tok::ne) {
      ++pos_;
      e.kind = op.kind == Tok::eq ? Expr::Kind::equals : Expr::Kind::not_equals;
      e.values.push_back(parse_value());
      return e;
    }
    if (is_word(op, "in")) {
      ++pos_;
      e.kind = Expr::Kind::member_of;
      expect(Tok::lbrace, "'{'");
      e.values.push_back(parse_value());
      while (at(Tok::comma)) {
        ++pos_;
        e.values.push_back(parse_value());
      }
      expect(Tok::rbrace, "'}'");
      return e;
    }
    syntax(op.pos, op.text, "expected '==', '!=' or 'in' after field '" + e.field + "'");
  }

  std::string parse_field() {
    const Token& t = peek();
    if (t.kind != Tok::word || is_keyword(t.text)) syntax(t.pos, t.text, "expected field name");
    ++pos_;
    return t.text;
  }

  std::string parse_value() {
    const Token& t = peek();
    if (t.kind == Tok::string || (t.kind == Tok::word && !is_keyword(t.text))) {
      ++pos_;
      return t.text;
    }
    syntax(t.pos, t.text, "expected value");
  }

  std::string parse_label() {
    const Token& t = peek();
    if (t.kind == Tok::string || (t.kind == Tok::word && !is_keyword(t.text))) {
      ++pos_;
      return t.text;
    }
    syntax(t.pos, t.text, "expected label");
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string format(const Diagnostic& d) {
  return std::to_string(d.pos.line) + ":" + std::to_string(d.pos.column) + ": " + d.message +
         (d.subject.empty() ? "" : " ('" + d.subject + "')");
}

bool Expr::operator==(const Expr& other) const {
  return kind == other.kind && field == other.field && values == other.values && operands == other.operands;
}

Program parse_program(std::string_view source) { return Parser(Lexer(source).run()).run(); }

}  // namespace orch::dsl
