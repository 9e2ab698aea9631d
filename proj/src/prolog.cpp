#include "ozk/prolog.hpp"

#include <algorithm>
#include <cctype>
#include <functional>
#include <set>
#include <unordered_map>
#include <unordered_set>

namespace ozk::prolog {

PrologError::PrologError(Kind kind, SourcePos pos, const std::string& message)
    : std::runtime_error(ozk::to_string(pos) + ": " +
                         (kind == Kind::Syntax        ? "syntax error: "
                          : kind == Kind::Unsupported ? "unsupported construct: "
                          : kind == Kind::QuietGuard  ? "quiet guard violation: "
                                                      : "undefined predicate: ") +
                         message),
      kind_(kind),
      pos_(pos) {}

bool Term::is(std::string_view functor, std::size_t arity) const {
  if (arity == 0) return kind == Kind::Atom && name == functor;
  return kind == Kind::Compound && name == functor && args.size() == arity;
}

namespace {

bool is_list_cell(const Term& t) { return t.is(".", 2); }

void write_term(const Term& t, std::string& out) {
  switch (t.kind) {
    case Term::Kind::Var:
    case Term::Kind::Atom:
      out += t.name;
      return;
    case Term::Kind::Int:
      out += std::to_string(t.value);
      return;
    case Term::Kind::Compound:
      break;
  }
  if (is_list_cell(t)) {
    out += "[";
    const Term* cur = &t;
    bool first = true;
    while (is_list_cell(*cur)) {
      if (!first) out += ",";
      first = false;
      write_term(cur->args[0], out);
      cur = &cur->args[1];
    }
    if (!cur->is("[]", 0)) {
      out += "|";
      write_term(*cur, out);
    }
    out += "]";
    return;
  }
  out += t.name + "(";
  for (std::size_t i = 0; i < t.args.size(); ++i) {
    if (i) out += ",";
    write_term(t.args[i], out);
  }
  out += ")";
}

}  // namespace

std::string to_string(const Term& t) {
  std::string out;
  write_term(t, out);
  return out;
}

// --- reader --------------------------------------------------------------------

namespace {

struct Token {
  enum class Kind : std::uint8_t { Var, Name, Int, Punct, End, Eof };
  Kind kind = Kind::Eof;
  std::string text;
  std::int64_t value = 0;
  SourcePos pos;
  bool functional = false;  // name immediately followed by '('
  std::size_t offset = 0;
};

const std::string kSymbolChars = "+-*/\\^<>=~:.?@#&$";

std::vector<Token> lex(std::string_view src) {
  std::vector<Token> out;
  int line = 1, col = 1;
  std::size_t i = 0;
  auto advance = [&](std::size_t n) {
    for (std::size_t k = 0; k < n && i < src.size(); ++k, ++i) {
      if (src[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
  };
  auto error = [&](const std::string& msg) { throw PrologError(PrologError::Kind::Syntax, {line, col}, msg); };
  while (true) {
    while (i < src.size()) {
      char c = src[i];
      if (std::isspace(static_cast<unsigned char>(c))) {
        advance(1);
      } else if (c == '%') {
        while (i < src.size() && src[i] != '\n') advance(1);
      } else if (c == '/' && i + 1 < src.size() && src[i + 1] == '*') {
        std::size_t end = src.find("*/", i + 2);
        if (end == std::string_view::npos) error("unterminated comment");
        advance(end + 2 - i);
      } else {
        break;
      }
    }
    Token t;
    t.pos = {line, col};
    t.offset = i;
    if (i >= src.size()) {
      out.push_back(t);
      return out;
    }
    char c = src[i];
    auto word_end = [&](std::size_t j) {
      while (j < src.size() && (std::isalnum(static_cast<unsigned char>(src[j])) || src[j] == '_')) ++j;
      return j;
    };
    if (std::isupper(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = word_end(i + 1);
      t.kind = Token::Kind::Var;
      t.text = std::string(src.substr(i, j - i));
      advance(j - i);
    } else if (std::islower(static_cast<unsigned char>(c))) {
      std::size_t j = word_end(i + 1);
      t.kind = Token::Kind::Name;
      t.text = std::string(src.substr(i, j - i));
      advance(j - i);
    } else if (std::isdigit(static_cast<unsigned char>(c))) {
      std::size_t j = i;
      while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
      t.kind = Token::Kind::Int;
      t.text = std::string(src.substr(i, j - i));
      try {
        t.value = std::stoll(t.text);
      } catch (const std::out_of_range&) {
        error("integer literal out of range");
      }
      advance(j - i);
    } else if (c == '\'') {
      std::string text;
      std::size_t j = i + 1;
      while (true) {
        if (j >= src.size()) error("unterminated quoted atom");
        if (src[j] == '\'') {
          if (j + 1 < src.size() && src[j + 1] == '\'') {
            text.push_back('\'');
            j += 2;
            continue;
          }
          break;
        }
        if (src[j] == '\\' && j + 1 < src.size()) ++j;
        text.push_back(src[j++]);
      }
      t.kind = Token::Kind::Name;
      t.text = text;
      advance(j + 1 - i);
    } else if (std::string_view("()[],|!;{}").find(c) != std::string_view::npos) {
      t.kind = c == '!' || c == ';' ? Token::Kind::Name : Token::Kind::Punct;
      t.text = std::string(1, c);
      advance(1);
    } else if (kSymbolChars.find(c) != std::string::npos) {
      std::size_t j = i;
      while (j < src.size() && kSymbolChars.find(src[j]) != std::string::npos) ++j;
      if (c == '.' && j == i + 1 &&
          (j >= src.size() || std::isspace(static_cast<unsigned char>(src[j])) || src[j] == '%')) {
        t.kind = Token::Kind::End;
        t.text = ".";
      } else {
        t.kind = Token::Kind::Name;
        t.text = std::string(src.substr(i, j - i));
      }
      advance(j - i);
    } else {
      error(std::string("unexpected character '") + c + "'");
    }
    if (t.kind == Token::Kind::Name && i < src.size() && src[i] == '(') t.functional = true;
    out.push_back(std::move(t));
  }
}

enum class Assoc : std::uint8_t { xfx, xfy, yfx };

struct InfixOp {
  int prec;
  Assoc assoc;
};

const std::unordered_map<std::string, InfixOp>& infix_ops() {
  static const std::unordered_map<std::string, InfixOp> ops = {
      {":-", {1200, Assoc::xfx}}, {";", {1100, Assoc::xfy}},  {"->", {1050, Assoc::xfy}},
      {",", {1000, Assoc::xfy}},  {"=", {700, Assoc::xfx}},   {"\\=", {700, Assoc::xfx}},
      {"is", {700, Assoc::xfx}},  {"==", {700, Assoc::xfx}},  {"\\==", {700, Assoc::xfx}},
      {"<", {700, Assoc::xfx}},   {">", {700, Assoc::xfx}},   {"=<", {700, Assoc::xfx}},
      {">=", {700, Assoc::xfx}},  {"=:=", {700, Assoc::xfx}}, {"=\\=", {700, Assoc::xfx}},
      {"=..", {700, Assoc::xfx}}, {"+", {500, Assoc::yfx}},   {"-", {500, Assoc::yfx}},
      {"*", {400, Assoc::yfx}},   {"/", {400, Assoc::yfx}},   {"//", {400, Assoc::yfx}},
      {"div", {400, Assoc::yfx}}, {"mod", {400, Assoc::yfx}}, {"^", {200, Assoc::xfy}},
  };
  return ops;
}

class Reader {
 public:
  Reader(std::string_view src) : src_(src), toks_(lex(src)) {}

  std::vector<Clause> clauses() {
    std::vector<Clause> out;
    while (peek().kind != Token::Kind::Eof) {
      std::size_t start = peek().offset;
      Term t = term(1200);
      if (peek().kind != Token::Kind::End) error("expected '.' at end of clause");
      std::size_t end = take().offset + 1;
      out.push_back(make_clause(std::move(t), std::string(src_.substr(start, end - start))));
    }
    return out;
  }

  std::vector<Term> query() {
    Term t = term(1200);
    if (peek().kind == Token::Kind::End) take();
    if (peek().kind != Token::Kind::Eof) error("unexpected text after query");
    std::vector<Term> goals;
    flatten(t, goals);
    for (auto& g : goals) {
      if (g.is("!", 0)) throw PrologError(PrologError::Kind::Unsupported, g.pos, "cut in a query");
      check_goal(g);
    }
    return goals;
  }

 private:
  const Token& peek(std::size_t k = 0) const { return toks_[std::min(pos_ + k, toks_.size() - 1)]; }
  Token take() { return toks_[pos_ < toks_.size() - 1 ? pos_++ : pos_]; }
  [[noreturn]] void error(const std::string& msg) const {
    throw PrologError(PrologError::Kind::Syntax, peek().pos, msg);
  }
  bool is_punct(const char* s) const { return peek().kind == Token::Kind::Punct && peek().text == s; }
  void expect_punct(const char* s) {
    if (!is_punct(s)) error(std::string("expected '") + s + "'");
    take();
  }

  bool starts_term(const Token& t) const {
    switch (t.kind) {
      case Token::Kind::Var:
      case Token::Kind::Int:
        return true;
      case Token::Kind::Name:
        return !infix_ops().count(t.text) || t.functional || t.text == "-" || t.text == "\\+";
      case Token::Kind::Punct:
        return t.text == "(" || t.text == "[" || t.text == "{";
      default:
        return false;
    }
  }

  Term term(int max_prec) {
    int left_prec = 0;
    Term left = primary(max_prec, left_prec);
    while (true) {
      const Token& t = peek();
      std::string op;
      if (t.kind == Token::Kind::Name || (t.kind == Token::Kind::Punct && t.text == ",")) op = t.text;
      auto it = infix_ops().find(op);
      if (op.empty() || it == infix_ops().end()) break;
      auto [prec, assoc] = it->second;
      if (prec > max_prec) break;
      int left_max = assoc == Assoc::yfx ? prec : prec - 1;
      int right_max = assoc == Assoc::xfy ? prec : prec - 1;
      if (left_prec > left_max) break;
      Token op_tok = take();
      Term right = term(right_max);
      Term c;
      c.kind = Term::Kind::Compound;
      c.name = op;
      c.pos = op_tok.pos;
      c.args.push_back(std::move(left));
      c.args.push_back(std::move(right));
      left = std::move(c);
      left_prec = prec;
    }
    return left;
  }

  Term primary(int max_prec, int& prec_out) {
    Token t = take();
    Term out;
    out.pos = t.pos;
    prec_out = 0;
    switch (t.kind) {
      case Token::Kind::Var:
        out.kind = Term::Kind::Var;
        out.name = t.text;
        return out;
      case Token::Kind::Int:
        out.kind = Term::Kind::Int;
        out.value = t.value;
        return out;
      case Token::Kind::Name:
        break;
      case Token::Kind::Punct:
        if (t.text == "(") {
          Term inner = term(1200);
          expect_punct(")");
          return inner;
        }
        if (t.text == "[") return list(t.pos);
        if (t.text == "{") throw PrologError(PrologError::Kind::Unsupported, t.pos, "curly-brace terms");
        throw PrologError(PrologError::Kind::Syntax, t.pos, "unexpected '" + t.text + "'");
      case Token::Kind::End:
        throw PrologError(PrologError::Kind::Syntax, t.pos, "unexpected '.'");
      case Token::Kind::Eof:
        throw PrologError(PrologError::Kind::Syntax, t.pos, "unexpected end of input");
    }
    out.name = t.text;
    if (t.functional) {
      take();  // (
      out.kind = Term::Kind::Compound;
      out.args.push_back(term(999));
      while (is_punct(",")) {
        take();
        out.args.push_back(term(999));
      }
      expect_punct(")");
      return out;
    }
    if (t.text == "-" && peek().kind == Token::Kind::Int && peek().offset == t.offset + 1) {
      Token n = take();
      out.kind = Term::Kind::Int;
      out.value = -n.value;
      return out;
    }
    if ((t.text == "-" || t.text == "\\+" || t.text == ":-") && starts_term(peek())) {
      int prec = t.text == "-" ? 200 : (t.text == "\\+" ? 900 : 1200);
      if (prec > max_prec) prec = 999;
      out.kind = Term::Kind::Compound;
      out.args.push_back(term(t.text == "-" ? 200 : prec));
      prec_out = prec;
      return out;
    }
    out.kind = Term::Kind::Atom;
    return out;
  }

  Term list(SourcePos pos) {
    Term nil;
    nil.kind = Term::Kind::Atom;
    nil.name = "[]";
    nil.pos = pos;
    if (is_punct("]")) {
      take();
      return nil;
    }
    std::vector<Term> items;
    items.push_back(term(999));
    while (is_punct(",")) {
      take();
      items.push_back(term(999));
    }
    Term tail = nil;
    if (is_punct("|")) {
      take();
      tail = term(999);
    }
    expect_punct("]");
    for (auto it = items.rbegin(); it != items.rend(); ++it) {
      Term cell;
      cell.kind = Term::Kind::Compound;
      cell.name = ".";
      cell.pos = it->pos;
      cell.args.push_back(std::move(*it));
      cell.args.push_back(std::move(tail));
      tail = std::move(cell);
    }
    return tail;
  }

  static void flatten(const Term& t, std::vector<Term>& out) {
    if (t.is(",", 2)) {
      flatten(t.args[0], out);
      flatten(t.args[1], out);
    } else {
      out.push_back(t);
    }
  }

  static void check_goal(const Term& g) {
    auto unsupported = [&](const std::string& what) {
      throw PrologError(PrologError::Kind::Unsupported, g.pos, what);
    };
    if (g.is_var()) unsupported("variable goal " + g.name + " (call/1)");
    if (g.kind == Term::Kind::Int) unsupported("integer used as a goal");
    static const std::set<std::string> forbidden = {
        "\\+",     "not",     "call",    "assert", "asserta", "assertz", "retract", "retractall", "abolish",
        "findall", "forall",  "->",      ";",      "\\=",     "=..",     "functor", "arg",        "copy_term",
        "var",     "nonvar",  "atom",    "number", "integer", "atomic",  "compound", "write",     "writeln",
        "print",   "nl",      "read",    "format", "catch",   "throw",   "once",    "ignore",     "aggregate_all"};
    if (forbidden.count(g.name)) unsupported(g.name + "/" + std::to_string(g.args.size()));
    if ((g.is("bagof", 3) || g.is("setof", 3))) {
      const Term* inner = &g.args[1];
      while (inner->is("^", 2)) inner = &inner->args[1];
      std::vector<Term> goals;
      flatten(*inner, goals);
      for (auto& x : goals) {
        if (x.is("!", 0)) unsupported("cut inside " + g.name + "/3");
        check_goal(x);
      }
    }
  }

  Clause make_clause(Term t, std::string text) {
    Clause c;
    c.pos = t.pos;
    c.text = std::move(text);
    if (t.is(":-", 1)) throw PrologError(PrologError::Kind::Unsupported, t.pos, "directive :- " + to_string(t.args[0]));
    std::vector<Term> goals;
    if (t.is(":-", 2)) {
      c.head = std::move(t.args[0]);
      flatten(t.args[1], goals);
    } else {
      c.head = std::move(t);
    }
    if (c.head.kind != Term::Kind::Atom && c.head.kind != Term::Kind::Compound)
      throw PrologError(PrologError::Kind::Syntax, c.head.pos, "clause head must be an atom or a compound term");
    if (c.head.is("[]", 0) || is_list_cell(c.head))
      throw PrologError(PrologError::Kind::Syntax, c.head.pos, "clause head must be an atom or a compound term");
    for (auto& g : goals) {
      if (g.is("!", 0)) {
        if (c.cut >= 0)
          throw PrologError(PrologError::Kind::Unsupported, g.pos, "second cut in a clause of " + c.head.name);
        c.cut = static_cast<int>(c.body.size());
        continue;
      }
      check_goal(g);
      c.body.push_back(std::move(g));
    }
    return c;
  }

  std::string_view src_;
  std::vector<Token> toks_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<Clause> parse(std::string_view text) { return Reader(text).clauses(); }

std::vector<Term> parse_query(std::string_view text) { return Reader(text).query(); }

std::vector<Predicate> group(const std::vector<Clause>& clauses) {
  std::vector<Predicate> out;
  std::unordered_map<std::string, std::size_t> index;
  for (auto& c : clauses) {
    Predicate key;
    key.name = c.head.name;
    key.arity = c.head.args.size();
    auto [it, fresh] = index.emplace(key.key(), out.size());
    if (fresh) out.push_back(std::move(key));
    out[it->second].clauses.push_back(c);
  }
  return out;
}

const char* class_name(PredClass c) {
  switch (c) {
    case PredClass::Deterministic:
      return "deterministic";
    case PredClass::GuardedCut:
      return "guarded cut";
    case PredClass::Nondeterministic:
      return "nondeterministic";
  }
  return "?";
}

// --- classification ------------------------------------------------------------

namespace {

bool is_comparison(const Term& g) {
  static const std::set<std::string> ops = {"==", "\\==", "<", ">", "=<", ">=", "=:=", "=\\="};
  return g.kind == Term::Kind::Compound && g.args.size() == 2 && ops.count(g.name);
}

bool is_builtin_goal(const Term& g) {
  return is_comparison(g) || g.is("is", 2) || g.is("=", 2) || g.is("true", 0) || g.is("fail", 0) ||
         g.is("false", 0) || g.is("bagof", 3) || g.is("setof", 3);
}

void term_vars(const Term& t, std::vector<std::string>& out) {
  if (t.is_var()) {
    if (!t.is_anonymous() && std::find(out.begin(), out.end(), t.name) == out.end()) out.push_back(t.name);
    return;
  }
  for (auto& a : t.args) term_vars(a, out);
}

bool ground(const Term& t) {
  if (t.is_var()) return false;
  for (auto& a : t.args)
    if (!ground(a)) return false;
  return true;
}

std::string principal(const Term& t) {
  switch (t.kind) {
    case Term::Kind::Int:
      return "#" + std::to_string(t.value);
    case Term::Kind::Atom:
      return t.name + "/0";
    default:
      return t.name + "/" + std::to_string(t.args.size());
  }
}

// Goals used as the guard of the last clause of a guarded-cut predicate when
// it has no cut: its leading tests.
std::size_t leading_tests(const Clause& c) {
  std::size_t n = 0;
  while (n < c.body.size() && is_comparison(c.body[n])) ++n;
  return n;
}

}  // namespace

Classification classify(const Predicate& pred) {
  Classification out;
  bool any_cut = false;
  for (auto& c : pred.clauses) any_cut |= c.cut >= 0;
  if (!any_cut) {
    if (pred.clauses.size() == 1) {
      out.cls = PredClass::Deterministic;
      return out;
    }
    // disjoint principal functors on the first argument
    std::set<std::string> seen;
    bool disjoint = pred.arity > 0;
    for (auto& c : pred.clauses) {
      if (!disjoint) break;
      const Term& a = c.head.args[0];
      disjoint = !a.is_var() && seen.insert(principal(a)).second;
    }
    if (disjoint) {
      out.cls = PredClass::Deterministic;
      return out;
    }
    out.cls = PredClass::Nondeterministic;
    return out;
  }
  for (std::size_t k = 0; k + 1 < pred.clauses.size(); ++k) {
    if (pred.clauses[k].cut < 0)
      throw PrologError(PrologError::Kind::Unsupported, pred.clauses[k].pos,
                        "clause " + std::to_string(k + 1) + " of " + pred.key() +
                            " has no cut while a later clause has one (red cut)");
  }
  out.cls = PredClass::GuardedCut;
  out.deterministic_guard = true;
  for (std::size_t k = 0; k < pred.clauses.size(); ++k) {
    const Clause& c = pred.clauses[k];
    std::size_t guard_len = c.cut >= 0 ? static_cast<std::size_t>(c.cut) : leading_tests(c);
    std::vector<std::string> head_vars;
    term_vars(c.head, head_vars);
    auto is_head_var = [&](const Term& t) {
      return t.is_var() && !t.is_anonymous() &&
             std::find(head_vars.begin(), head_vars.end(), t.name) != head_vars.end();
    };
    for (std::size_t g = 0; g < guard_len; ++g) {
      const Term& goal = c.body[g];
      if (!is_builtin_goal(goal) || goal.is("bagof", 3) || goal.is("setof", 3)) out.deterministic_guard = false;
      if (goal.is("is", 2) && is_head_var(goal.args[0]))
        throw PrologError(PrologError::Kind::QuietGuard, goal.pos,
                          "guard of " + pred.key() + " binds head variable " + goal.args[0].name);
      if (goal.is("=", 2) && (is_head_var(goal.args[0]) || is_head_var(goal.args[1])))
        throw PrologError(PrologError::Kind::QuietGuard, goal.pos,
                          "guard of " + pred.key() + " binds head variable in " + to_string(goal));
    }
  }
  return out;
}

// --- translation ---------------------------------------------------------------

std::string kernel_name(const std::string& functor) {
  static const std::set<std::string> reserved = {"Browse",   "Show", "Wait", "WaitNeeded", "Delay", "SolveOne",
                                                 "SolveAll", "Solve", "Sort", "IsDet",     "Uniq"};
  std::string out;
  bool upper = true;
  for (char c : functor) {
    if (c == '_') {
      upper = true;
      continue;
    }
    if (!std::isalnum(static_cast<unsigned char>(c))) {
      out += "X";
      upper = true;
      continue;
    }
    out.push_back(upper ? static_cast<char>(std::toupper(static_cast<unsigned char>(c))) : c);
    upper = false;
  }
  if (out.empty() || !std::isupper(static_cast<unsigned char>(out[0]))) out = "P" + out;
  if (reserved.count(out)) out += "Pred";
  return out;
}

namespace {

std::string var_name(const std::string& prolog_name) {
  if (!prolog_name.empty() && prolog_name[0] == '_') return "U" + prolog_name;
  return prolog_name;
}

PhrasePtr make_record(const std::string& label, std::vector<PhrasePtr> items, SourcePos pos) {
  auto r = make_phrase(Phrase::Kind::Record, pos);
  r->name = label;
  r->items = std::move(items);
  return r;
}

PhrasePtr builtin_call(const char* name, std::vector<PhrasePtr> args, SourcePos pos) {
  return make_call(make_var(name, pos), std::move(args), pos);
}

PhrasePtr and_then(PhrasePtr a, PhrasePtr b) {
  if (!a) return b;
  return make_binop("andthen", std::move(a), std::move(b), b->pos);
}

Body make_body(std::vector<std::string> decls, std::vector<PhrasePtr> stmts) {
  Body b;
  for (auto& d : decls) b.decls.push_back(make_var(var_name(d)));
  b.has_decls = !b.decls.empty();
  b.stmts = std::move(stmts);
  if (b.stmts.empty()) b.stmts.push_back(make_phrase(Phrase::Kind::Skip));
  return b;
}

void minus(std::vector<std::string>& a, const std::vector<std::string>& b) {
  a.erase(std::remove_if(a.begin(), a.end(),
                         [&](const std::string& x) { return std::find(b.begin(), b.end(), x) != b.end(); }),
          a.end());
}

void add_all(std::vector<std::string>& a, const std::vector<std::string>& b) {
  for (auto& x : b)
    if (std::find(a.begin(), a.end(), x) == a.end()) a.push_back(x);
}

class Translator {
 public:
  Translator(const Options& opts, std::set<std::string> defined) : opts_(opts), defined_(std::move(defined)) {}

  // Data terms: variables, atoms, integers, lists, records.
  PhrasePtr data(const Term& t, const std::set<std::string>* wild = nullptr) const {
    switch (t.kind) {
      case Term::Kind::Var:
        if (t.is_anonymous() || (wild && wild->count(t.name))) return make_phrase(Phrase::Kind::Wildcard, t.pos);
        return make_var(var_name(t.name), t.pos);
      case Term::Kind::Int:
        return make_int(t.value, t.pos);
      case Term::Kind::Atom:
        return make_atom(t.name == "[]" ? "nil" : t.name, t.pos);
      case Term::Kind::Compound:
        break;
    }
    if (is_list_cell(t)) {
      std::vector<const Term*> items;
      const Term* cur = &t;
      while (is_list_cell(*cur)) {
        items.push_back(&cur->args[0]);
        cur = &cur->args[1];
      }
      if (cur->is("[]", 0)) {
        auto list = make_phrase(Phrase::Kind::List, t.pos);
        for (auto* i : items) list->items.push_back(data(*i, wild));
        return list;
      }
      PhrasePtr tail = data(*cur, wild);
      for (auto it = items.rbegin(); it != items.rend(); ++it) tail = make_cons(data(**it, wild), std::move(tail), t.pos);
      return tail;
    }
    std::vector<PhrasePtr> items;
    for (auto& a : t.args) items.push_back(data(a, wild));
    return make_record(t.name, std::move(items), t.pos);
  }

  PhrasePtr arith(const Term& t) const {
    switch (t.kind) {
      case Term::Kind::Var:
        if (t.is_anonymous()) throw PrologError(PrologError::Kind::Unsupported, t.pos, "anonymous variable in arithmetic");
        return make_var(var_name(t.name), t.pos);
      case Term::Kind::Int:
        return make_int(t.value, t.pos);
      default:
        break;
    }
    if (t.kind == Term::Kind::Compound && t.args.size() == 2) {
      static const std::unordered_map<std::string, std::string> ops = {
          {"+", "+"}, {"-", "-"}, {"*", "*"}, {"//", "div"}, {"div", "div"}, {"mod", "mod"}};
      if (auto it = ops.find(t.name); it != ops.end())
        return make_binop(it->second, arith(t.args[0]), arith(t.args[1]), t.pos);
    }
    if (t.is("-", 1)) {
      if (t.args[0].kind == Term::Kind::Int) return make_int(-t.args[0].value, t.pos);
      return make_binop("-", make_int(0, t.pos), arith(t.args[0]), t.pos);
    }
    throw PrologError(PrologError::Kind::Unsupported, t.pos, "arithmetic expression " + to_string(t));
  }

  PhrasePtr comparison(const Term& g) const {
    if (g.name == "==" || g.name == "\\==")
      return make_binop(g.name == "==" ? "==" : "\\=", data(g.args[0]), data(g.args[1]), g.pos);
    std::string op = g.name == "=:=" ? "==" : g.name == "=\\=" ? "\\=" : g.name;
    return make_binop(op, arith(g.args[0]), arith(g.args[1]), g.pos);
  }

  // Variables a clause declares itself. Variables that only occur inside a
  // bagof/setof goal belong to the encapsulated search instead.
  std::vector<std::string> clause_vars(const Term& head, const std::vector<Term>& goals) const {
    std::vector<std::string> out;
    term_vars(head, out);
    for (auto& g : goals) {
      if (!is_bag(g)) term_vars(g, out);
    }
    for (auto& g : goals) {
      if (!is_bag(g)) continue;
      term_vars(g.args[2], out);
      auto [tmpl, ex, inner] = split_bag(g);
      std::vector<std::string> free;
      term_vars(inner, free);
      minus(free, tmpl);
      minus(free, ex);
      if (!opts_.bagof_generators) {
        std::vector<std::string> outside;
        term_vars(head, outside);
        for (auto& o : goals)
          if (&o != &g) term_vars(o, outside);
        term_vars(g.args[2], outside);
        std::vector<std::string> inner_only = free;
        minus(inner_only, outside);
        minus(free, inner_only);
      }
      add_all(out, free);
    }
    return out;
  }

  static bool is_bag(const Term& g) { return g.is("bagof", 3) || g.is("setof", 3); }

  static std::tuple<std::vector<std::string>, std::vector<std::string>, Term> split_bag(const Term& g) {
    std::vector<std::string> tmpl, ex;
    term_vars(g.args[0], tmpl);
    const Term* inner = &g.args[1];
    while (inner->is("^", 2)) {
      term_vars(inner->args[0], ex);
      inner = &inner->args[1];
    }
    return {tmpl, ex, *inner};
  }

  void goal(const Term& g, const std::vector<std::string>& scope, std::vector<PhrasePtr>& out,
            const std::set<std::string>* wild = nullptr) const {
    if (g.is("true", 0)) return;
    if (g.is("fail", 0) || g.is("false", 0)) {
      out.push_back(make_phrase(Phrase::Kind::Fail, g.pos));
      return;
    }
    if (g.is("=", 2)) {
      out.push_back(make_unify(data(g.args[0], wild), data(g.args[1], wild), g.pos));
      return;
    }
    if (g.is("is", 2)) {
      out.push_back(make_unify(data(g.args[0], wild), arith(g.args[1]), g.pos));
      return;
    }
    if (is_comparison(g)) {
      out.push_back(comparison(g));
      return;
    }
    if (is_bag(g)) {
      bag(g, scope, out);
      return;
    }
    std::string key = g.name + "/" + std::to_string(g.args.size());
    if (!defined_.count(key)) throw PrologError(PrologError::Kind::Undefined, g.pos, key);
    std::vector<PhrasePtr> args;
    for (auto& a : g.args) args.push_back(data(a, wild));
    out.push_back(make_call(make_var(kernel_name(g.name), g.pos), std::move(args), g.pos));
  }

  // bagof(T, V^G, R) -> {SolveAll proc {$ K} G end R}
  void bag(const Term& g, const std::vector<std::string>& scope, std::vector<PhrasePtr>& out) const {
    auto [tmpl, ex, inner] = split_bag(g);
    std::vector<std::string> inner_vars;
    term_vars(g.args[0], inner_vars);
    term_vars(inner, inner_vars);
    std::vector<std::string> locals = inner_vars;
    minus(locals, scope);

    std::vector<Term> inner_goals;
    flatten_conj(inner, inner_goals);

    // Locals that occur once and not in the template read as `_`.
    std::unordered_map<std::string, int> count;
    std::function<void(const Term&)> tally = [&](const Term& t) {
      if (t.is_var() && !t.is_anonymous()) ++count[t.name];
      for (auto& a : t.args) tally(a);
    };
    tally(inner);
    std::set<std::string> wild;
    for (auto& v : locals)
      if (count[v] == 1 && std::find(tmpl.begin(), tmpl.end(), v) == tmpl.end()) wild.insert(v);

    if (opts_.bagof_generators) {
      std::vector<std::string> free;
      term_vars(inner, free);
      minus(free, tmpl);
      minus(free, ex);
      if (!free.empty()) {
        std::set<std::string> gen_wild(inner_vars.begin(), inner_vars.end());
        for (auto& f : free) gen_wild.erase(f);
        for (auto& ig : inner_goals) goal(ig, scope, out, &gen_wild);
      }
    }

    auto proc = make_phrase(Phrase::Kind::Proc, g.pos);
    proc->head = make_phrase(Phrase::Kind::Dollar, g.pos);
    std::vector<std::string> decls;
    for (auto& v : locals)
      if (!wild.count(v)) decls.push_back(v);
    std::vector<PhrasePtr> stmts;
    std::vector<std::string> inner_scope = scope;
    add_all(inner_scope, inner_vars);
    for (auto& ig : inner_goals) goal(ig, inner_scope, stmts, &wild);
    const Term& t = g.args[0];
    if (t.is_var() && !t.is_anonymous() && std::find(locals.begin(), locals.end(), t.name) != locals.end()) {
      proc->items.push_back(make_var(var_name(t.name), t.pos));
      decls.erase(std::find(decls.begin(), decls.end(), t.name));
    } else {
      std::string sol = fresh_name("Sol", inner_scope);
      proc->items.push_back(make_var(sol, t.pos));
      stmts.push_back(make_unify(make_var(sol, t.pos), data(t), t.pos));
    }
    proc->body = make_body(decls, std::move(stmts));

    if (g.name == "bagof") {
      std::vector<PhrasePtr> args;
      args.push_back(std::move(proc));
      args.push_back(data(g.args[2]));
      out.push_back(builtin_call("SolveAll", std::move(args), g.pos));
    } else {
      std::vector<PhrasePtr> a1;
      a1.push_back(std::move(proc));
      std::vector<PhrasePtr> a2;
      a2.push_back(builtin_call("SolveAll", std::move(a1), g.pos));
      std::vector<PhrasePtr> a3;
      a3.push_back(builtin_call("Sort", std::move(a2), g.pos));
      out.push_back(make_unify(data(g.args[2]), builtin_call("Uniq", std::move(a3), g.pos), g.pos));
    }
  }

  static void flatten_conj(const Term& t, std::vector<Term>& out) {
    if (t.is(",", 2)) {
      flatten_conj(t.args[0], out);
      flatten_conj(t.args[1], out);
    } else {
      out.push_back(t);
    }
  }

  static std::string fresh_name(const std::string& base, const std::vector<std::string>& taken) {
    std::string name = base;
    for (int i = 1; std::find(taken.begin(), taken.end(), name) != taken.end(); ++i) name = base + std::to_string(i);
    return name;
  }

  // A head argument position keeps a clause variable's name as parameter
  // when every clause either has that variable there or does not use it.
  std::vector<std::string> params(const Predicate& p) const {
    std::vector<std::string> out;
    std::vector<std::string> all;
    for (auto& c : p.clauses) {
      term_vars(c.head, all);
      for (auto& g : c.body) term_vars(g, all);
    }
    for (std::size_t i = 0; i < p.arity; ++i) {
      std::string chosen;
      for (auto& c : p.clauses) {
        const Term& a = c.head.args[i];
        if (a.is_var() && !a.is_anonymous()) {
          chosen = a.name;
          break;
        }
      }
      bool ok = !chosen.empty() && std::find(out.begin(), out.end(), var_name(chosen)) == out.end();
      for (auto& c : p.clauses) {
        if (!ok) break;
        const Term& a = c.head.args[i];
        if (a.is_var() && a.name == chosen) continue;
        std::vector<std::string> vs;
        term_vars(c.head, vs);
        for (auto& g : c.body) term_vars(g, vs);
        ok = std::find(vs.begin(), vs.end(), chosen) == vs.end();
      }
      if (ok) {
        out.push_back(var_name(chosen));
      } else {
        std::vector<std::string> taken = all;
        add_all(taken, out);
        out.push_back(fresh_name("A" + std::to_string(i + 1), taken));
      }
    }
    return out;
  }

  // Head arguments that are plain variables occurring once in the head take
  // the parameter's name.
  static Clause normalize(const Clause& c, const std::vector<std::string>& ps) {
    std::unordered_map<std::string, int> count;
    std::function<void(const Term&)> tally = [&](const Term& t) {
      if (t.is_var()) ++count[t.name];
      for (auto& a : t.args) tally(a);
    };
    tally(c.head);
    std::unordered_map<std::string, std::string> rename;
    for (std::size_t i = 0; i < ps.size(); ++i) {
      const Term& a = c.head.args[i];
      if (a.is_var() && !a.is_anonymous() && var_name(a.name) != ps[i] && count[a.name] == 1) rename[a.name] = ps[i];
    }
    if (rename.empty()) return c;
    std::function<void(Term&)> apply = [&](Term& t) {
      if (t.is_var()) {
        if (auto it = rename.find(t.name); it != rename.end()) t.name = it->second;
      }
      for (auto& a : t.args) apply(a);
    };
    Clause out = c;
    apply(out.head);
    for (auto& g : out.body) apply(g);
    return out;
  }

  // `Pattern = Param` for head arguments that are not the parameter itself.
  void head_unifs(const Clause& c, const std::vector<std::string>& ps, std::vector<PhrasePtr>& out) const {
    for (std::size_t i = 0; i < ps.size(); ++i) {
      const Term& a = c.head.args[i];
      if (a.is_anonymous() || (a.is_var() && var_name(a.name) == ps[i])) continue;
      // constants read as F=terach, structures as N|_=Cs
      if (a.kind == Term::Kind::Atom || a.kind == Term::Kind::Int)
        out.push_back(make_unify(make_var(ps[i], a.pos), data(a), a.pos));
      else
        out.push_back(make_unify(data(a), make_var(ps[i], a.pos), a.pos));
    }
  }

  Body plain_clause(const Clause& c, const std::vector<std::string>& ps) const {
    std::vector<std::string> vars = clause_vars(c.head, c.body);
    minus(vars, ps);
    std::vector<std::string> scope = vars;
    add_all(scope, ps);
    std::vector<PhrasePtr> stmts;
    head_unifs(c, ps, stmts);
    for (auto& g : c.body) goal(g, scope, stmts);
    return make_body(vars, std::move(stmts));
  }

  struct Arm {
    bool boolean = false;
    PhrasePtr cond;
    std::vector<std::string> guard_vars;
    std::vector<PhrasePtr> guard;
    Body body;
    bool unconditional = false;  // last clause without cut and without tests
  };

  Arm guarded_arm(const Clause& c, const std::vector<std::string>& ps, bool last) const {
    Arm arm;
    bool has_cut = c.cut >= 0;
    std::size_t guard_len = has_cut ? static_cast<std::size_t>(c.cut) : 0;
    if (!has_cut) {
      // Leading tests over parameters only.
      while (guard_len < c.body.size() && is_comparison(c.body[guard_len])) {
        std::vector<std::string> vs;
        term_vars(c.body[guard_len], vs);
        minus(vs, ps);
        if (!vs.empty()) break;
        ++guard_len;
      }
    }
    std::vector<Term> guard_goals(c.body.begin(), c.body.begin() + static_cast<std::ptrdiff_t>(guard_len));
    std::vector<Term> rest(c.body.begin() + static_cast<std::ptrdiff_t>(guard_len), c.body.end());

    std::vector<std::string> gv;
    if (has_cut)
      for (std::size_t i = 0; i < ps.size(); ++i) term_vars(c.head.args[i], gv);
    for (auto& g : guard_goals) term_vars(g, gv);
    minus(gv, ps);
    std::vector<std::string> scope = ps;
    add_all(scope, gv);

    bool tests_only = std::all_of(guard_goals.begin(), guard_goals.end(), [](const Term& g) { return is_comparison(g); });
    bool ground_heads = true;
    if (has_cut) {
      for (std::size_t i = 0; i < ps.size(); ++i) {
        const Term& a = c.head.args[i];
        if (a.is_anonymous() || (a.is_var() && var_name(a.name) == ps[i])) continue;
        if (!ground(a)) ground_heads = false;
      }
    }
    arm.boolean = gv.empty() && tests_only && ground_heads;
    if (arm.boolean) {
      PhrasePtr cond;
      if (has_cut) {
        for (std::size_t i = 0; i < ps.size(); ++i) {
          const Term& a = c.head.args[i];
          if (a.is_anonymous() || (a.is_var() && var_name(a.name) == ps[i])) continue;
          cond = and_then(std::move(cond), make_binop("==", make_var(ps[i], a.pos), data(a), a.pos));
        }
      }
      for (auto& g : guard_goals) cond = and_then(std::move(cond), comparison(g));
      if (!cond) {
        if (last && !has_cut) arm.unconditional = true;
        cond = make_atom("true", c.pos);
      }
      arm.cond = std::move(cond);
    } else {
      arm.guard_vars = gv;
      if (has_cut) {
        for (std::size_t i = 0; i < ps.size(); ++i) {
          const Term& a = c.head.args[i];
          if (a.is_anonymous() || (a.is_var() && var_name(a.name) == ps[i])) continue;
          if (ground(a))
            arm.guard.push_back(make_binop("==", make_var(ps[i], a.pos), data(a), a.pos));
          else
            arm.guard.push_back(make_unify(make_var(ps[i], a.pos), data(a), a.pos));
        }
      }
      for (auto& g : guard_goals) goal(g, scope, arm.guard);
      if (arm.guard.empty()) arm.guard.push_back(make_phrase(Phrase::Kind::Skip, c.pos));
    }

    std::vector<PhrasePtr> stmts;
    if (!has_cut) head_unifs(c, ps, stmts);
    std::vector<std::string> bv;
    if (!has_cut) {
      Term head_only = c.head;
      bv = clause_vars(head_only, rest);
    } else {
      bv = clause_vars(Term{}, rest);
    }
    minus(bv, ps);
    minus(bv, gv);
    std::vector<std::string> body_scope = scope;
    add_all(body_scope, bv);
    for (auto& g : rest) goal(g, body_scope, stmts);
    arm.body = make_body(bv, std::move(stmts));
    return arm;
  }

  PhrasePtr guarded(const Predicate& p, const std::vector<std::string>& ps, bool det_guard) const {
    std::vector<Arm> arms;
    for (std::size_t k = 0; k < p.clauses.size(); ++k) arms.push_back(guarded_arm(p.clauses[k], ps, k + 1 == p.clauses.size()));
    std::unique_ptr<Body> else_body;
    if (arms.size() > 1 && arms.back().unconditional) {
      else_body = std::make_unique<Body>(std::move(arms.back().body));
      arms.pop_back();
    } else {
      else_body = std::make_unique<Body>(make_body({}, {}));
      else_body->stmts.clear();
      else_body->stmts.push_back(make_phrase(Phrase::Kind::Fail));
    }
    if (det_guard) {
      auto ifp = make_phrase(Phrase::Kind::If, p.clauses[0].pos);
      for (auto& a : arms) {
        IfArm ia;
        if (a.boolean) {
          ia.cond = std::move(a.cond);
        } else {
          ia.deep = true;
          if (a.guard_vars.empty()) a.guard_vars.push_back(fresh_name("G", ps));
          for (auto& v : a.guard_vars) ia.guard_vars.push_back(var_name(v));
          ia.guard.stmts = std::move(a.guard);
        }
        ia.body = std::move(a.body);
        ifp->if_arms.push_back(std::move(ia));
      }
      ifp->else_body = std::move(else_body);
      return ifp;
    }
    // case {SolveOne fun {$} Guard end} of [Y] then Body elsecase ... else fail end
    PhrasePtr result;
    Phrase* tail = nullptr;
    for (auto& a : arms) {
      auto cs = make_phrase(Phrase::Kind::Case, p.clauses[0].pos);
      auto fn = make_phrase(Phrase::Kind::Fun, cs->pos);
      fn->head = make_phrase(Phrase::Kind::Dollar, cs->pos);
      std::vector<PhrasePtr> gstmts;
      if (a.boolean) {
        if (!(a.cond->kind == Phrase::Kind::Atom && a.cond->name == "true")) {
          auto t = make_phrase(Phrase::Kind::If, cs->pos);
          IfArm ia;
          ia.cond = std::move(a.cond);
          ia.body = make_body({}, {});
          t->if_arms.push_back(std::move(ia));
          t->else_body = std::make_unique<Body>();
          t->else_body->stmts.push_back(make_phrase(Phrase::Kind::Fail));
          gstmts.push_back(std::move(t));
        }
      } else {
        gstmts = std::move(a.guard);
      }
      PhrasePtr pattern_item;
      if (a.guard_vars.size() == 1) {
        gstmts.push_back(make_var(var_name(a.guard_vars[0])));
        pattern_item = make_var(var_name(a.guard_vars[0]));
      } else if (a.guard_vars.empty()) {
        gstmts.push_back(make_atom("unit"));
        pattern_item = make_phrase(Phrase::Kind::Wildcard);
      } else {
        std::vector<PhrasePtr> r1, r2;
        for (auto& v : a.guard_vars) {
          r1.push_back(make_var(var_name(v)));
          r2.push_back(make_var(var_name(v)));
        }
        gstmts.push_back(make_record("out", std::move(r1), cs->pos));
        pattern_item = make_record("out", std::move(r2), cs->pos);
      }
      fn->body = make_body(a.guard_vars, std::move(gstmts));
      std::vector<PhrasePtr> args;
      args.push_back(std::move(fn));
      cs->head = builtin_call("SolveOne", std::move(args), cs->pos);
      PatternArm pa;
      pa.pattern = make_phrase(Phrase::Kind::List, cs->pos);
      pa.pattern->items.push_back(std::move(pattern_item));
      pa.body = std::move(a.body);
      cs->case_arms.push_back(std::move(pa));
      Phrase* raw = cs.get();
      if (!tail) {
        result = std::move(cs);
      } else {
        tail->else_body = std::make_unique<Body>();
        tail->else_body->stmts.push_back(std::move(cs));
      }
      tail = raw;
    }
    tail->else_body = std::move(else_body);
    return result;
  }

  PhrasePtr predicate(const Predicate& p, const Classification& cls) const {
    auto proc = make_phrase(Phrase::Kind::Proc, p.clauses[0].pos);
    proc->head = make_var(kernel_name(p.name), p.clauses[0].pos);
    std::vector<std::string> ps = params(p);
    for (auto& n : ps) proc->items.push_back(make_var(n, p.clauses[0].pos));
    Predicate norm = p;
    for (auto& c : norm.clauses) c = normalize(c, ps);
    return predicate_body(norm, cls, ps, std::move(proc));
  }

  PhrasePtr predicate_body(const Predicate& p, const Classification& cls, const std::vector<std::string>& ps,
                           PhrasePtr proc) const {
    if (cls.cls == PredClass::GuardedCut) {
      proc->body.stmts.push_back(guarded(p, ps, cls.deterministic_guard));
    } else if (p.clauses.size() == 1) {
      proc->body = plain_clause(p.clauses[0], ps);
    } else {
      auto ch = make_phrase(Phrase::Kind::Choice, p.clauses[0].pos);
      for (auto& c : p.clauses) ch->alternatives.push_back(plain_clause(c, ps));
      proc->body.stmts.push_back(std::move(ch));
    }
    return proc;
  }

  PhrasePtr query(const std::vector<Term>& goals, bool all) const {
    Term head;
    std::vector<std::string> vars = clause_vars(head, goals);
    std::vector<std::string> shown;
    for (auto& g : goals) term_vars(g, shown);
    shown.erase(std::remove_if(shown.begin(), shown.end(),
                               [&](const std::string& v) {
                                 return v[0] == '_' || std::find(vars.begin(), vars.end(), v) == vars.end();
                               }),
                shown.end());
    std::vector<PhrasePtr> stmts;
    for (auto& g : goals) goal(g, vars, stmts);
    if (shown.empty()) {
      stmts.push_back(make_atom("yes"));
    } else if (shown.size() == 1) {
      stmts.push_back(make_var(var_name(shown[0])));
    } else {
      std::vector<PhrasePtr> items;
      for (auto& v : shown) items.push_back(make_var(var_name(v)));
      stmts.push_back(make_record("sol", std::move(items), {}));
    }
    auto fn = make_phrase(Phrase::Kind::Fun);
    fn->head = make_phrase(Phrase::Kind::Dollar);
    fn->body = make_body(vars, std::move(stmts));
    std::vector<PhrasePtr> a1;
    a1.push_back(std::move(fn));
    std::vector<PhrasePtr> a2;
    a2.push_back(builtin_call(all ? "SolveAll" : "SolveOne", std::move(a1), {}));
    return builtin_call("Browse", std::move(a2), {});
  }

 private:
  const Options& opts_;
  std::set<std::string> defined_;
};

}  // namespace

Translation translate(const std::vector<Clause>& clauses, const Options& opts) {
  Translation out;
  out.predicates = group(clauses);
  std::set<std::string> defined;
  for (auto& p : out.predicates) defined.insert(p.key());
  Translator tr(opts, defined);
  for (auto& p : out.predicates) {
    Classification cls = classify(p);
    std::string summary = p.key() + ": " + class_name(cls.cls);
    if (cls.cls == PredClass::GuardedCut)
      summary += cls.deterministic_guard ? ", deterministic guards" : ", nondeterministic guards";
    out.program.push_back(tr.predicate(p, cls));
    out.summaries.push_back(summary);
    out.classes.push_back(cls);
  }
  return out;
}

std::string translate_source(std::string_view text, const Options& opts) {
  Translation t = translate(parse(text), opts);
  std::string out;
  for (std::size_t i = 0; i < t.program.size(); ++i) {
    if (i) out += "\n";
    out += "% " + t.summaries[i] + "\n";
    out += print_phrase(*t.program[i]) + "\n";
  }
  return out;
}

PhrasePtr translate_query(const std::vector<Term>& goals, const Translation& program, bool all_solutions,
                          const Options& opts) {
  std::set<std::string> defined;
  for (auto& p : program.predicates) defined.insert(p.key());
  return Translator(opts, defined).query(goals, all_solutions);
}

}  // namespace ozk::prolog
