#include <cctype>
#include <limits>
#include <sstream>
#include <unordered_set>

#include "ozk/render.hpp"
#include "ozk/syntax.hpp"

namespace ozk {

std::string to_string(const SourcePos& pos) {
  return std::to_string(pos.line) + ":" + std::to_string(pos.column);
}

// --- phrase helpers --------------------------------------------------------

PhrasePtr make_phrase(Phrase::Kind kind, SourcePos pos) { return std::make_unique<Phrase>(kind, pos); }

PhrasePtr make_var(std::string name, SourcePos pos) {
  auto p = make_phrase(Phrase::Kind::Var, pos);
  p->name = std::move(name);
  return p;
}

PhrasePtr make_atom(std::string name, SourcePos pos) {
  auto p = make_phrase(Phrase::Kind::Atom, pos);
  p->name = std::move(name);
  return p;
}

PhrasePtr make_int(std::int64_t value, SourcePos pos) {
  auto p = make_phrase(Phrase::Kind::Int, pos);
  p->num = value;
  return p;
}

PhrasePtr make_binop(std::string op, PhrasePtr a, PhrasePtr b, SourcePos pos) {
  auto p = make_phrase(Phrase::Kind::BinOp, pos);
  p->name = std::move(op);
  p->items.push_back(std::move(a));
  p->items.push_back(std::move(b));
  return p;
}

PhrasePtr make_unify(PhrasePtr a, PhrasePtr b, SourcePos pos) {
  auto p = make_phrase(Phrase::Kind::Unify, pos);
  p->items.push_back(std::move(a));
  p->items.push_back(std::move(b));
  return p;
}

PhrasePtr make_cons(PhrasePtr h, PhrasePtr t, SourcePos pos) {
  auto p = make_phrase(Phrase::Kind::Cons, pos);
  p->items.push_back(std::move(h));
  p->items.push_back(std::move(t));
  return p;
}

PhrasePtr make_call(PhrasePtr target, std::vector<PhrasePtr> args, SourcePos pos) {
  auto p = make_phrase(Phrase::Kind::Call, pos);
  p->items.push_back(std::move(target));
  for (auto& a : args) p->items.push_back(std::move(a));
  return p;
}

Body clone(const Body& b) {
  Body out;
  out.has_decls = b.has_decls;
  for (auto& d : b.decls) out.decls.push_back(clone(*d));
  for (auto& s : b.stmts) out.stmts.push_back(clone(*s));
  return out;
}

PhrasePtr clone(const Phrase& p) {
  auto out = make_phrase(p.kind, p.pos);
  out->name = p.name;
  out->num = p.num;
  out->lazy = p.lazy;
  for (auto& i : p.items) out->items.push_back(clone(*i));
  if (p.head) out->head = clone(*p.head);
  for (auto& arm : p.if_arms) {
    IfArm a;
    a.deep = arm.deep;
    a.guard_vars = arm.guard_vars;
    a.guard = clone(arm.guard);
    if (arm.cond) a.cond = clone(*arm.cond);
    a.body = clone(arm.body);
    out->if_arms.push_back(std::move(a));
  }
  for (auto& arm : p.case_arms) out->case_arms.push_back(PatternArm{clone(*arm.pattern), clone(arm.body)});
  for (auto& alt : p.alternatives) out->alternatives.push_back(clone(alt));
  out->body = clone(p.body);
  if (p.else_body) out->else_body = std::make_unique<Body>(clone(*p.else_body));
  return out;
}

// --- lexer -----------------------------------------------------------------

namespace {

enum class Tok : std::uint8_t { Var, Atom, Int, Keyword, Sym, Eof };

struct Token {
  Tok kind;
  std::string text;
  std::int64_t num = 0;
  SourcePos pos;
  bool space_before = false;
};

const std::unordered_set<std::string>& keywords() {
  static const std::unordered_set<std::string> k = {
      "proc", "fun",    "lazy",    "end",  "if",     "then",   "elseif", "else", "case",
      "of",   "elsecase", "choice", "thread", "local", "in",    "skip",   "fail", "declare",
      "div",  "mod",    "andthen", "orelse"};
  return k;
}

std::vector<Token> lex(std::string_view src) {
  std::vector<Token> out;
  std::size_t i = 0;
  int line = 1, col = 1;
  bool space = true;
  auto advance = [&](std::size_t n = 1) {
    for (std::size_t k = 0; k < n && i < src.size(); ++k, ++i) {
      if (src[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
  };
  while (i < src.size()) {
    char c = src[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      advance();
      space = true;
      continue;
    }
    if (c == '%') {
      while (i < src.size() && src[i] != '\n') advance();
      space = true;
      continue;
    }
    if (c == '/' && i + 1 < src.size() && src[i + 1] == '*') {
      SourcePos start{line, col};
      advance(2);
      while (i + 1 < src.size() && !(src[i] == '*' && src[i + 1] == '/')) advance();
      if (i + 1 >= src.size()) throw SyntaxError(start, "unterminated comment");
      advance(2);
      space = true;
      continue;
    }
    Token t;
    t.pos = {line, col};
    t.space_before = space;
    space = false;
    if (std::isupper(static_cast<unsigned char>(c))) {
      std::size_t j = i;
      while (j < src.size() && (std::isalnum(static_cast<unsigned char>(src[j])) || src[j] == '_')) ++j;
      t.kind = Tok::Var;
      t.text = std::string(src.substr(i, j - i));
      advance(j - i);
    } else if (std::islower(static_cast<unsigned char>(c))) {
      std::size_t j = i;
      while (j < src.size() && (std::isalnum(static_cast<unsigned char>(src[j])) || src[j] == '_')) ++j;
      t.text = std::string(src.substr(i, j - i));
      t.kind = keywords().count(t.text) ? Tok::Keyword : Tok::Atom;
      advance(j - i);
    } else if (std::isdigit(static_cast<unsigned char>(c))) {
      std::size_t j = i;
      std::uint64_t v = 0;
      while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) {
        v = v * 10 + static_cast<std::uint64_t>(src[j] - '0');
        if (v > static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max()))
          throw SyntaxError(t.pos, "integer literal out of range");
        ++j;
      }
      t.kind = Tok::Int;
      t.num = static_cast<std::int64_t>(v);
      t.text = std::string(src.substr(i, j - i));
      advance(j - i);
    } else if (c == '\'') {
      std::string text;
      advance();
      while (i < src.size() && src[i] != '\'') {
        if (src[i] == '\\' && i + 1 < src.size()) advance();
        text.push_back(src[i]);
        advance();
      }
      if (i >= src.size()) throw SyntaxError(t.pos, "unterminated quoted atom");
      advance();
      t.kind = Tok::Atom;
      t.text = std::move(text);
    } else {
      static const char* multi[] = {"[]", "==", "\\=", "=<", ">="};
      t.kind = Tok::Sym;
      bool matched = false;
      for (const char* m : multi) {
        std::string_view mv(m);
        if (src.substr(i, mv.size()) == mv) {
          t.text = std::string(mv);
          advance(mv.size());
          matched = true;
          break;
        }
      }
      if (!matched) {
        static const std::string singles = "{}()[]|=<>+-*$_~?#";
        if (singles.find(c) == std::string::npos)
          throw SyntaxError(t.pos, std::string("unexpected character '") + c + "'");
        // `_Foo` is not a separate token kind; treat `_` followed by an
        // identifier character as an error to keep the grammar small.
        t.text = std::string(1, c);
        advance();
      }
    }
    out.push_back(std::move(t));
  }
  Token eof;
  eof.kind = Tok::Eof;
  eof.pos = {line, col};
  eof.space_before = true;
  out.push_back(eof);
  return out;
}

// --- parser ----------------------------------------------------------------

class Parser {
 public:
  explicit Parser(std::vector<Token> toks) : toks_(std::move(toks)) {}

  std::vector<PhrasePtr> program() {
    std::vector<PhrasePtr> out;
    while (!at_eof()) {
      if (is_kw("declare")) {
        out.push_back(declare());
        continue;
      }
      if (is_terminator()) fail_here("unexpected '" + peek().text + "'");
      out.push_back(expr());
    }
    return out;
  }

 private:
  const Token& peek(std::size_t k = 0) const { return toks_[std::min(pos_ + k, toks_.size() - 1)]; }
  bool at_eof() const { return peek().kind == Tok::Eof; }
  bool is_kw(const char* kw, std::size_t k = 0) const {
    return peek(k).kind == Tok::Keyword && peek(k).text == kw;
  }
  bool is_sym(const char* s, std::size_t k = 0) const { return peek(k).kind == Tok::Sym && peek(k).text == s; }
  Token take() { return toks_[pos_ < toks_.size() - 1 ? pos_++ : pos_]; }

  [[noreturn]] void fail_here(const std::string& msg) const { throw SyntaxError(peek().pos, msg); }

  void expect_kw(const char* kw) {
    if (!is_kw(kw)) fail_here(std::string("expected '") + kw + "' but found '" + describe(peek()) + "'");
    take();
  }
  void expect_sym(const char* s) {
    if (!is_sym(s)) fail_here(std::string("expected '") + s + "' but found '" + describe(peek()) + "'");
    take();
  }
  static std::string describe(const Token& t) { return t.kind == Tok::Eof ? "end of input" : t.text; }

  bool is_terminator() const {
    if (at_eof()) return true;
    const Token& t = peek();
    if (t.kind == Tok::Keyword) {
      static const std::unordered_set<std::string> stops = {"end", "then", "else", "elseif", "elsecase", "of", "in"};
      return stops.count(t.text) > 0;
    }
    return t.kind == Tok::Sym && (t.text == "[]" || t.text == "}" || t.text == ")" || t.text == "]");
  }

  Body body() {
    Body b;
    while (true) {
      if (is_kw("in")) {
        if (b.has_decls) fail_here("second 'in' in the same body");
        SourcePos p = peek().pos;
        take();
        if (b.stmts.empty()) throw SyntaxError(p, "'in' without declarations");
        b.decls = std::move(b.stmts);
        b.stmts.clear();
        b.has_decls = true;
        continue;
      }
      if (is_terminator()) break;
      b.stmts.push_back(expr());
    }
    return b;
  }

  PhrasePtr declare() {
    auto p = make_phrase(Phrase::Kind::Declare, take().pos);
    while (!at_eof() && !is_kw("in")) {
      if (is_terminator()) fail_here("unexpected '" + peek().text + "' in declare");
      p->body.decls.push_back(expr());
    }
    if (p->body.decls.empty()) fail_here("empty declare");
    if (is_kw("in")) take();
    p->body.has_decls = true;
    return p;
  }

  // unify := orelse ('=' unify)?
  PhrasePtr expr() {
    auto lhs = orelse();
    if (is_sym("=")) {
      SourcePos p = take().pos;
      auto rhs = expr();
      return make_unify(std::move(lhs), std::move(rhs), p);
    }
    return lhs;
  }

  PhrasePtr orelse() {
    auto lhs = andthen();
    while (is_kw("orelse")) {
      SourcePos p = take().pos;
      lhs = make_binop("orelse", std::move(lhs), andthen(), p);
    }
    return lhs;
  }

  PhrasePtr andthen() {
    auto lhs = comparison();
    while (is_kw("andthen")) {
      SourcePos p = take().pos;
      lhs = make_binop("andthen", std::move(lhs), comparison(), p);
    }
    return lhs;
  }

  PhrasePtr comparison() {
    auto lhs = cons();
    static const std::unordered_set<std::string> ops = {"==", "\\=", "<", ">", "=<", ">="};
    if (peek().kind == Tok::Sym && ops.count(peek().text)) {
      Token op = take();
      auto rhs = cons();
      if (peek().kind == Tok::Sym && ops.count(peek().text)) fail_here("comparison operators do not associate");
      return make_binop(op.text, std::move(lhs), std::move(rhs), op.pos);
    }
    return lhs;
  }

  PhrasePtr cons() {
    auto head = additive();
    if (is_sym("|")) {
      SourcePos p = take().pos;
      return make_cons(std::move(head), cons(), p);
    }
    return head;
  }

  PhrasePtr additive() {
    auto lhs = multiplicative();
    while (is_sym("+") || is_sym("-")) {
      Token op = take();
      lhs = make_binop(op.text, std::move(lhs), multiplicative(), op.pos);
    }
    return lhs;
  }

  PhrasePtr multiplicative() {
    auto lhs = unary();
    while (is_sym("*") || is_kw("div") || is_kw("mod")) {
      Token op = take();
      lhs = make_binop(op.text, std::move(lhs), unary(), op.pos);
    }
    return lhs;
  }

  PhrasePtr unary() {
    if (is_sym("~")) {
      SourcePos p = take().pos;
      auto operand = unary();
      if (operand->kind == Phrase::Kind::Int) {
        operand->num = -operand->num;
        operand->pos = p;
        return operand;
      }
      return make_binop("-", make_int(0, p), std::move(operand), p);
    }
    return primary();
  }

  PhrasePtr primary() {
    const Token& t = peek();
    switch (t.kind) {
      case Tok::Var: {
        Token v = take();
        return make_var(v.text, v.pos);
      }
      case Tok::Int: {
        Token v = take();
        return make_int(v.num, v.pos);
      }
      case Tok::Atom: {
        Token a = take();
        if (is_sym("(") && !peek().space_before) {
          take();
          auto rec = make_phrase(Phrase::Kind::Record, a.pos);
          rec->name = a.text;
          while (!is_sym(")")) {
            if (at_eof()) fail_here("unterminated record");
            rec->items.push_back(expr());
          }
          take();
          if (rec->items.empty()) return make_atom(a.text, a.pos);
          return rec;
        }
        return make_atom(a.text, a.pos);
      }
      case Tok::Sym:
        return symbol_primary();
      case Tok::Keyword:
        return keyword_primary();
      case Tok::Eof:
        fail_here("unexpected end of input");
    }
    fail_here("unexpected token");
  }

  PhrasePtr symbol_primary() {
    Token t = take();
    if (t.text == "_") return make_phrase(Phrase::Kind::Wildcard, t.pos);
    if (t.text == "$") return make_phrase(Phrase::Kind::Dollar, t.pos);
    if (t.text == "?") {
      if (peek().kind != Tok::Var) fail_here("'?' must precede a variable");
      Token v = take();
      return make_var(v.text, v.pos);
    }
    if (t.text == "(") {
      auto e = expr();
      expect_sym(")");
      return e;
    }
    if (t.text == "[") {
      auto list = make_phrase(Phrase::Kind::List, t.pos);
      while (!is_sym("]")) {
        if (at_eof()) fail_here("unterminated list");
        list->items.push_back(expr());
      }
      take();
      if (list->items.empty()) return make_atom("nil", t.pos);
      return list;
    }
    if (t.text == "{") {
      auto call = make_phrase(Phrase::Kind::Call, t.pos);
      if (is_sym("}")) fail_here("empty application");
      while (!is_sym("}")) {
        if (at_eof()) fail_here("unterminated application");
        call->items.push_back(expr());
      }
      take();
      return call;
    }
    throw SyntaxError(t.pos, "unexpected '" + t.text + "'");
  }

  PhrasePtr keyword_primary() {
    const Token& t = peek();
    if (t.text == "skip") return make_phrase(Phrase::Kind::Skip, take().pos);
    if (t.text == "fail") return make_phrase(Phrase::Kind::Fail, take().pos);
    if (t.text == "proc" || t.text == "fun") return procedure();
    if (t.text == "if") return if_phrase();
    if (t.text == "case") return case_phrase();
    if (t.text == "choice") {
      auto p = make_phrase(Phrase::Kind::Choice, take().pos);
      if (is_kw("end")) fail_here("choice needs at least one alternative");
      p->alternatives.push_back(body());
      while (is_sym("[]")) {
        take();
        p->alternatives.push_back(body());
      }
      expect_kw("end");
      return p;
    }
    if (t.text == "thread" || t.text == "local") {
      auto p = make_phrase(t.text == "thread" ? Phrase::Kind::Thread : Phrase::Kind::Local, take().pos);
      p->body = body();
      expect_kw("end");
      return p;
    }
    fail_here("unexpected keyword '" + t.text + "'");
  }

  PhrasePtr procedure() {
    Token kw = take();
    auto p = make_phrase(kw.text == "proc" ? Phrase::Kind::Proc : Phrase::Kind::Fun, kw.pos);
    if (kw.text == "fun" && is_kw("lazy")) {
      take();
      p->lazy = true;
    }
    expect_sym("{");
    if (is_sym("$")) {
      p->head = make_phrase(Phrase::Kind::Dollar, take().pos);
    } else if (peek().kind == Tok::Var) {
      Token n = take();
      p->head = make_var(n.text, n.pos);
    } else {
      fail_here("expected procedure name or '$'");
    }
    while (!is_sym("}")) {
      if (is_sym("?")) take();
      if (peek().kind != Tok::Var) fail_here("expected parameter name");
      Token v = take();
      p->items.push_back(make_var(v.text, v.pos));
    }
    take();
    p->body = body();
    expect_kw("end");
    return p;
  }

  bool deep_guard_ahead() const {
    std::size_t k = 0;
    while (peek(k).kind == Tok::Var) ++k;
    return k > 0 && is_kw("in", k);
  }

  IfArm if_arm() {
    IfArm arm;
    if (deep_guard_ahead()) {
      arm.deep = true;
      while (peek().kind == Tok::Var) arm.guard_vars.push_back(take().text);
      expect_kw("in");
      arm.guard = body();
      if (arm.guard.has_decls) fail_here("nested declarations in guard");
      if (arm.guard.stmts.empty()) fail_here("empty guard");
    } else {
      arm.cond = expr();
    }
    expect_kw("then");
    arm.body = body();
    return arm;
  }

  PhrasePtr if_phrase() {
    auto p = make_phrase(Phrase::Kind::If, take().pos);
    p->if_arms.push_back(if_arm());
    while (is_kw("elseif")) {
      take();
      p->if_arms.push_back(if_arm());
    }
    if (is_kw("else")) {
      take();
      p->else_body = std::make_unique<Body>(body());
    }
    expect_kw("end");
    return p;
  }

  // case E of P then B [] ... (elsecase E of ...)* [else B] end
  PhrasePtr case_phrase() {
    auto p = make_phrase(Phrase::Kind::Case, take().pos);
    case_rest(*p);
    expect_kw("end");
    return p;
  }

  void case_rest(Phrase& p) {
    p.head = expr();
    expect_kw("of");
    while (true) {
      PatternArm arm;
      arm.pattern = expr();
      expect_kw("then");
      arm.body = body();
      p.case_arms.push_back(std::move(arm));
      if (!is_sym("[]")) break;
      take();
    }
    if (is_kw("elsecase")) {
      auto inner = make_phrase(Phrase::Kind::Case, take().pos);
      case_rest(*inner);
      p.else_body = std::make_unique<Body>();
      p.else_body->stmts.push_back(std::move(inner));
    } else if (is_kw("else")) {
      take();
      p.else_body = std::make_unique<Body>(body());
    }
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
};

// --- printer ---------------------------------------------------------------

int precedence(const Phrase& p) {
  switch (p.kind) {
    case Phrase::Kind::Unify:
      return 1;
    case Phrase::Kind::BinOp:
      if (p.name == "orelse") return 2;
      if (p.name == "andthen") return 3;
      if (p.name == "+" || p.name == "-") return 6;
      if (p.name == "*" || p.name == "div" || p.name == "mod") return 7;
      return 4;
    case Phrase::Kind::Cons:
      return 5;
    case Phrase::Kind::Int:
      return p.num < 0 ? 8 : 9;
    default:
      return 9;
  }
}

class Printer {
 public:
  std::string out;

  void line(int indent) {
    out.push_back('\n');
    out.append(static_cast<std::size_t>(indent) * 3, ' ');
  }

  void body(const Body& b, int indent) {
    if (b.has_decls) {
      for (std::size_t i = 0; i < b.decls.size(); ++i) {
        out.push_back(' ');
        expr(*b.decls[i], 1, indent);
      }
      out += " in";
    }
    for (auto& s : b.stmts) {
      line(indent);
      expr(*s, 1, indent);
    }
  }

  void expr(const Phrase& p, int min_prec, int indent) {
    bool parens = precedence(p) < min_prec;
    if (parens) out.push_back('(');
    switch (p.kind) {
      case Phrase::Kind::Var:
        out += p.name;
        break;
      case Phrase::Kind::Atom:
        out += atom_text(p.name);
        break;
      case Phrase::Kind::Int:
        out += p.num < 0 ? "~" + std::to_string(-p.num) : std::to_string(p.num);
        break;
      case Phrase::Kind::Wildcard:
        out += "_";
        break;
      case Phrase::Kind::Dollar:
        out += "$";
        break;
      case Phrase::Kind::Record:
        out += atom_text(p.name) + "(";
        for (std::size_t i = 0; i < p.items.size(); ++i) {
          if (i) out.push_back(' ');
          expr(*p.items[i], 2, indent);
        }
        out += ")";
        break;
      case Phrase::Kind::List:
        out += "[";
        for (std::size_t i = 0; i < p.items.size(); ++i) {
          if (i) out.push_back(' ');
          expr(*p.items[i], 2, indent);
        }
        out += "]";
        break;
      case Phrase::Kind::Cons:
        expr(*p.items[0], 6, indent);
        out += "|";
        expr(*p.items[1], 5, indent);
        break;
      case Phrase::Kind::BinOp: {
        int prec = precedence(p);
        bool cmp = prec == 4;
        expr(*p.items[0], cmp ? 5 : prec, indent);
        bool word = p.name == "div" || p.name == "mod" || p.name == "andthen" || p.name == "orelse";
        out += word ? " " + p.name + " " : p.name;
        expr(*p.items[1], cmp ? 5 : prec + 1, indent);
        break;
      }
      case Phrase::Kind::Unify:
        expr(*p.items[0], 2, indent);
        out += "=";
        expr(*p.items[1], 1, indent);
        break;
      case Phrase::Kind::Call:
        out += "{";
        for (std::size_t i = 0; i < p.items.size(); ++i) {
          if (i) out.push_back(' ');
          expr(*p.items[i], 2, indent);
        }
        out += "}";
        break;
      case Phrase::Kind::Proc:
      case Phrase::Kind::Fun:
        out += p.kind == Phrase::Kind::Proc ? "proc {" : (p.lazy ? "fun lazy {" : "fun {");
        expr(*p.head, 9, indent);
        for (auto& param : p.items) out += " " + param->name;
        out += "}";
        body(p.body, indent + 1);
        line(indent);
        out += "end";
        break;
      case Phrase::Kind::If:
        for (std::size_t i = 0; i < p.if_arms.size(); ++i) {
          const IfArm& arm = p.if_arms[i];
          if (i) line(indent);
          out += i == 0 ? "if " : "elseif ";
          if (arm.deep) {
            for (auto& v : arm.guard_vars) out += v + " ";
            out += "in";
            for (auto& g : arm.guard.stmts) {
              out.push_back(' ');
              expr(*g, 1, indent + 1);
            }
          } else {
            expr(*arm.cond, 1, indent + 1);
          }
          out += " then";
          body(arm.body, indent + 1);
        }
        if (p.else_body) {
          line(indent);
          out += "else";
          body(*p.else_body, indent + 1);
        }
        line(indent);
        out += "end";
        break;
      case Phrase::Kind::Case:
        case_body(p, indent);
        line(indent);
        out += "end";
        break;
      case Phrase::Kind::Choice:
        out += "choice";
        for (std::size_t i = 0; i < p.alternatives.size(); ++i) {
          if (i) {
            line(indent);
            out += "[]";
          }
          body(p.alternatives[i], indent + 1);
        }
        line(indent);
        out += "end";
        break;
      case Phrase::Kind::Thread:
      case Phrase::Kind::Local:
        out += p.kind == Phrase::Kind::Thread ? "thread" : "local";
        body(p.body, indent + 1);
        line(indent);
        out += "end";
        break;
      case Phrase::Kind::Skip:
        out += "skip";
        break;
      case Phrase::Kind::Fail:
        out += "fail";
        break;
      case Phrase::Kind::Declare:
        out += "declare";
        for (auto& d : p.body.decls) {
          out.push_back(' ');
          expr(*d, 1, indent);
        }
        out += " in";
        break;
    }
    if (parens) out.push_back(')');
  }

  void case_body(const Phrase& p, int indent) {
    out += "case ";
    expr(*p.head, 1, indent);
    out += " of ";
    for (std::size_t i = 0; i < p.case_arms.size(); ++i) {
      if (i) {
        line(indent);
        out += "[] ";
      }
      expr(*p.case_arms[i].pattern, 1, indent);
      out += " then";
      body(p.case_arms[i].body, indent + 1);
    }
    if (p.else_body) {
      const Body& e = *p.else_body;
      line(indent);
      if (!e.has_decls && e.stmts.size() == 1 && e.stmts[0]->kind == Phrase::Kind::Case) {
        // `elsecase` keeps the chain flat
        out += "else";
        case_body(*e.stmts[0], indent);
      } else {
        out += "else";
        body(e, indent + 1);
      }
    }
  }
};

bool same_body(const Body& a, const Body& b) {
  return a.has_decls == b.has_decls && same_structure(a.decls, b.decls) && same_structure(a.stmts, b.stmts);
}

}  // namespace

std::vector<PhrasePtr> parse_program(std::string_view source) {
  Parser parser(lex(source));
  return parser.program();
}

std::string print_phrase(const Phrase& p, int indent) {
  Printer pr;
  pr.expr(p, 1, indent);
  return pr.out;
}

std::string print_program(const std::vector<PhrasePtr>& program) {
  std::string out;
  for (auto& p : program) {
    out += print_phrase(*p, 0);
    out += "\n";
  }
  return out;
}

bool same_structure(const std::vector<PhrasePtr>& a, const std::vector<PhrasePtr>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!same_structure(*a[i], *b[i])) return false;
  return true;
}

bool same_structure(const Phrase& a, const Phrase& b) {
  if (a.kind != b.kind || a.name != b.name || a.num != b.num || a.lazy != b.lazy) return false;
  if (!same_structure(a.items, b.items)) return false;
  if ((a.head == nullptr) != (b.head == nullptr)) return false;
  if (a.head && !same_structure(*a.head, *b.head)) return false;
  if (a.if_arms.size() != b.if_arms.size()) return false;
  for (std::size_t i = 0; i < a.if_arms.size(); ++i) {
    const IfArm& x = a.if_arms[i];
    const IfArm& y = b.if_arms[i];
    if (x.deep != y.deep || x.guard_vars != y.guard_vars || !same_body(x.guard, y.guard) ||
        !same_body(x.body, y.body))
      return false;
    if ((x.cond == nullptr) != (y.cond == nullptr)) return false;
    if (x.cond && !same_structure(*x.cond, *y.cond)) return false;
  }
  if (a.case_arms.size() != b.case_arms.size()) return false;
  for (std::size_t i = 0; i < a.case_arms.size(); ++i) {
    if (!same_structure(*a.case_arms[i].pattern, *b.case_arms[i].pattern) ||
        !same_body(a.case_arms[i].body, b.case_arms[i].body))
      return false;
  }
  if (a.alternatives.size() != b.alternatives.size()) return false;
  for (std::size_t i = 0; i < a.alternatives.size(); ++i)
    if (!same_body(a.alternatives[i], b.alternatives[i])) return false;
  if (!same_body(a.body, b.body)) return false;
  if ((a.else_body == nullptr) != (b.else_body == nullptr)) return false;
  if (a.else_body && !same_body(*a.else_body, *b.else_body)) return false;
  return true;
}

}  // namespace ozk
