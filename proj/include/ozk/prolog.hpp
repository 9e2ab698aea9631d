#pragma once

// Pure Prolog subset: reader, predicate classification and translation to
// kernel phrases. Deterministic and guarded-cut predicates become if/case
// chains, the rest become choice statements; bagof/setof become SolveAll.

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "ozk/syntax.hpp"

namespace ozk::prolog {

class PrologError : public std::runtime_error {
 public:
  enum class Kind : std::uint8_t { Syntax, Unsupported, QuietGuard, Undefined };
  PrologError(Kind kind, SourcePos pos, const std::string& message);
  Kind kind() const { return kind_; }
  SourcePos pos() const { return pos_; }

 private:
  Kind kind_;
  SourcePos pos_;
};

struct Term {
  enum class Kind : std::uint8_t { Var, Atom, Int, Compound };
  Kind kind = Kind::Atom;
  std::string name;  // variable name, atom, functor
  std::int64_t value = 0;
  std::vector<Term> args;
  SourcePos pos;

  bool is_var() const { return kind == Kind::Var; }
  bool is_anonymous() const { return kind == Kind::Var && name == "_"; }
  bool is(std::string_view functor, std::size_t arity) const;
};

std::string to_string(const Term& t);

struct Clause {
  Term head;
  std::vector<Term> body;  // goals without the cut
  int cut = -1;            // number of goals before `!`, -1 without cut
  SourcePos pos;
  std::string text;        // source text of the clause
};

/// Reads clauses in source order. Throws PrologError.
std::vector<Clause> parse(std::string_view text);
/// Reads a query: a conjunction of goals, with or without the final '.'.
std::vector<Term> parse_query(std::string_view text);

struct Predicate {
  std::string name;
  std::size_t arity = 0;
  std::vector<Clause> clauses;
  std::string key() const { return name + "/" + std::to_string(arity); }
};

/// Groups clauses by functor, keeping the order of first appearance.
/// Discontiguous clauses are merged.
std::vector<Predicate> group(const std::vector<Clause>& clauses);

enum class PredClass : std::uint8_t { Deterministic, GuardedCut, Nondeterministic };
const char* class_name(PredClass c);

struct Classification {
  PredClass cls = PredClass::Nondeterministic;
  bool deterministic_guard = false;  // GuardedCut only
};

/// Throws QuietGuard when a guard binds a head variable, Unsupported for
/// cut placements outside the green/blue cut schemes.
Classification classify(const Predicate& pred);

struct Options {
  bool bagof_generators = false;  // search over free bagof variables
};

struct Translation {
  std::vector<PhrasePtr> program;      // one proc per predicate
  std::vector<std::string> summaries;  // `name/arity: class` per proc
  std::vector<Predicate> predicates;
  std::vector<Classification> classes;
};

Translation translate(const std::vector<Clause>& clauses, const Options& opts = {});
/// Kernel source for a Prolog program, with a comment line per predicate.
std::string translate_source(std::string_view text, const Options& opts = {});

/// Kernel statement that browses the solutions of a query. A single query
/// variable is shown as is, several as sol(V1 ... Vn), none as yes.
PhrasePtr translate_query(const std::vector<Term>& goals, const Translation& program, bool all_solutions,
                          const Options& opts = {});

/// Kernel procedure name for a predicate name: place_queens -> PlaceQueens.
std::string kernel_name(const std::string& functor);

}  // namespace ozk::prolog
