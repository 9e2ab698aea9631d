#pragma once

// Surface syntax of the kernel language: tokens, phrases and the parser.
// Oz-style: statements are juxtaposed, procedure application is written
// {P X Y}, `[]` separates arms and alternatives, `%` starts a comment.

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "ozk/ast.hpp"

namespace ozk {

class SyntaxError : public std::runtime_error {
 public:
  SyntaxError(SourcePos pos, const std::string& message)
      : std::runtime_error(to_string(pos) + ": syntax error: " + message), pos_(pos) {}
  SourcePos pos() const { return pos_; }

 private:
  SourcePos pos_;
};

struct Phrase;
using PhrasePtr = std::unique_ptr<Phrase>;

/// `D1 ... Dn in S1 ... Sm`, or just `S1 ... Sm`.
struct Body {
  std::vector<PhrasePtr> decls;
  std::vector<PhrasePtr> stmts;
  bool has_decls = false;
};

struct IfArm {
  bool deep = false;                    // `if X Y in Guard then`
  std::vector<std::string> guard_vars;  // deep only
  Body guard;                           // deep only
  PhrasePtr cond;                       // boolean guard
  Body body;
};

struct PatternArm {
  PhrasePtr pattern;
  Body body;
};

struct Phrase {
  enum class Kind : std::uint8_t {
    Var,
    Atom,
    Int,
    Wildcard,  // _
    Dollar,    // $ nesting marker
    Record,    // label(args...)
    Cons,      // H|T
    List,      // [a b c]
    BinOp,     // + - * div mod == \= < > =< >= andthen orelse
    Unify,     // A = B
    Call,      // {P Args...}: items[0] is the target
    Proc,      // proc {Name Params} Body end; head is Var or Dollar
    Fun,       // fun [lazy] {Name Params} Body end
    If,
    Case,
    Choice,
    Thread,
    Local,
    Skip,
    Fail,
    Declare,  // top-level `declare D in`
  };
  Kind kind;
  SourcePos pos;
  std::string name;  // Var / Atom / Record label / BinOp operator
  std::int64_t num = 0;
  std::vector<PhrasePtr> items;
  PhrasePtr head;  // Proc/Fun name, Case subject
  std::vector<IfArm> if_arms;
  std::vector<PatternArm> case_arms;
  std::vector<Body> alternatives;  // Choice
  Body body;                       // Proc/Fun/Thread/Local/Declare
  std::unique_ptr<Body> else_body;
  bool lazy = false;

  Phrase(Kind k, SourcePos p) : kind(k), pos(p) {}
};

PhrasePtr make_phrase(Phrase::Kind kind, SourcePos pos = {});
PhrasePtr make_var(std::string name, SourcePos pos = {});
PhrasePtr make_atom(std::string name, SourcePos pos = {});
PhrasePtr make_int(std::int64_t value, SourcePos pos = {});
PhrasePtr make_binop(std::string op, PhrasePtr a, PhrasePtr b, SourcePos pos = {});
PhrasePtr make_unify(PhrasePtr a, PhrasePtr b, SourcePos pos = {});
PhrasePtr make_cons(PhrasePtr h, PhrasePtr t, SourcePos pos = {});
PhrasePtr make_call(PhrasePtr target, std::vector<PhrasePtr> args, SourcePos pos = {});
PhrasePtr clone(const Phrase& p);
Body clone(const Body& b);

/// Parses a whole program: a sequence of top-level phrases.
std::vector<PhrasePtr> parse_program(std::string_view source);

/// Source text for phrases. Output re-parses to the same phrase structure.
std::string print_phrase(const Phrase& p, int indent = 0);
std::string print_program(const std::vector<PhrasePtr>& program);

bool same_structure(const Phrase& a, const Phrase& b);
bool same_structure(const std::vector<PhrasePtr>& a, const std::vector<PhrasePtr>& b);

}  // namespace ozk
