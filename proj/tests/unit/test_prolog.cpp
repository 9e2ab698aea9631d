#include <regex>

#include "doctest.h"
#include "oracles/prolog_oracle.hpp"
#include "ozk/prolog.hpp"
#include "ozk/syntax.hpp"
#include "support/run.hpp"

using namespace ozk;
namespace pl = ozk::prolog;

namespace {

std::string squash(const std::string& s) { return std::regex_replace(s, std::regex("\\s+"), " "); }

std::string family() { return testing::read_text(std::string(OZK_EXAMPLES) + "/family.pl"); }
std::string queens() { return testing::read_text(std::string(OZK_EXAMPLES) + "/queens.pl"); }

const pl::Predicate& pred(const pl::Translation& t, const std::string& key, pl::Classification& cls) {
  for (std::size_t i = 0; i < t.predicates.size(); ++i)
    if (t.predicates[i].key() == key) {
      cls = t.classes[i];
      return t.predicates[i];
    }
  FAIL("no predicate " << key);
  throw 0;
}

std::vector<std::string> solve(const std::string& text, const std::string& query, bool all = true,
                               bool generators = false) {
  pl::Options o;
  o.bagof_generators = generators;
  auto tr = pl::translate(pl::parse(text), o);
  std::string src = print_program(tr.program) + "\n" +
                    print_phrase(*pl::translate_query(pl::parse_query(query), tr, all, o));
  return testing::run(src).out;
}

pl::PrologError::Kind error_kind(const std::string& text) {
  try {
    pl::translate(pl::parse(text));
  } catch (const pl::PrologError& e) {
    return e.kind();
  }
  FAIL("no error for " << text);
  return pl::PrologError::Kind::Syntax;
}

}  // namespace

TEST_SUITE("prolog") {
  TEST_CASE("reader") {
    auto cs = pl::parse(queens());
    REQUIRE(cs.size() == 7);
    const auto& pq = cs[3];
    CHECK(pq.head.is("place_queens", 4));
    CHECK(pq.cut == 1);
    CHECK(cs[4].cut == -1);
    auto f = pl::parse("father(terach, abraham).");
    REQUIRE(f.size() == 1);
    CHECK(f[0].body.empty());
    CHECK(pl::to_string(f[0].head) == "father(terach,abraham)");
    auto q = pl::parse_query("X is 1 + 2 * 3, Y = [a, b | T]");
    REQUIRE(q.size() == 2);
    CHECK(pl::to_string(q[0]) == "is(X,+(1,*(2,3)))");
  }

  TEST_CASE("classification") {
    auto tr = pl::translate(pl::parse(queens()));
    pl::Classification c;
    pred(tr, "place_queens/4", c);
    CHECK(c.cls == pl::PredClass::GuardedCut);
    CHECK(c.deterministic_guard);
    pred(tr, "place_queen/4", c);
    CHECK(c.cls == pl::PredClass::Nondeterministic);
    pred(tr, "queens/2", c);
    CHECK(c.cls == pl::PredClass::Deterministic);

    auto fam = pl::translate(pl::parse(family()));
    pred(fam, "father/2", c);
    CHECK(c.cls == pl::PredClass::Nondeterministic);

    auto foo = pl::translate(pl::parse(
        "foo(X, Z) :- guard1(X, Y), !, Z = Y.\n"
        "foo(X, Z) :- guard2(X, Y), !, Z = Y.\n"
        "guard1(1, a).\nguard2(X, b) :- X > 1.\n"));
    pred(foo, "foo/2", c);
    CHECK(c.cls == pl::PredClass::GuardedCut);
    CHECK_FALSE(c.deterministic_guard);
  }

  TEST_CASE("unsupported constructs") {
    CHECK(error_kind("p(X) :- \\+ q(X).\nq(a).") == pl::PrologError::Kind::Unsupported);
    CHECK(error_kind("p(X) :- assert(q(X)).") == pl::PrologError::Kind::Unsupported);
    CHECK(error_kind("p(X) :- q(X).") == pl::PrologError::Kind::Undefined);
    CHECK(error_kind("p(X) :- X = (a") == pl::PrologError::Kind::Syntax);
    // a guard that binds a head variable is not quiet
    CHECK(error_kind("p(X) :- X = a, !.\np(_).") == pl::PrologError::Kind::QuietGuard);
  }

  TEST_CASE("translation shapes") {
    std::string q = squash(pl::translate_source(queens()));
    CHECK(q.find("if I==0 then skip elseif I>0 then") != std::string::npos);
    CHECK(q.find("else fail end") != std::string::npos);
    CHECK(q.find("proc {PlaceQueen N A2 A3 A4} choice N|_=A2 N|_=A3 N|_=A4 [] Cs2 Us2 Ds2 in") != std::string::npos);

    std::string f = squash(pl::translate_source(family()));
    CHECK(f.find("proc {Father A1 A2} choice A1=terach A2=abraham [] A1=abraham A2=isaac [] A1=haran A2=milcah "
                 "[] A1=haran A2=yiscah end end") != std::string::npos);
    CHECK(f.find("{SolveAll proc {$ K} {Father X K} end Kids}") != std::string::npos);
    CHECK(f.find("{SolveAll proc {$ K} {Father _ K} end Kids}") != std::string::npos);
    CHECK(f.find("Kids={Uniq {Sort {SolveAll") != std::string::npos);

    std::string g = squash(pl::translate_source(
        "foo(X, Z) :- guard1(X, Y), !, Z = Y.\nfoo(X, Z) :- guard2(X, Y), !, Z = Y.\n"
        "guard1(1, a).\nguard2(X, b) :- X > 1.\n"));
    CHECK(g.find("case {SolveOne fun {$} Y in {Guard1 X Y} Y end} of [Y] then") != std::string::npos);
  }

  TEST_CASE("translated output reads back") {
    for (const std::string& text : {queens(), family()}) {
      auto tr = pl::translate(pl::parse(text));
      auto again = parse_program(pl::translate_source(text));
      CHECK(same_structure(again, tr.program));
    }
  }

  TEST_CASE("names") {
    CHECK(pl::kernel_name("place_queens") == "PlaceQueens");
    CHECK(pl::kernel_name("foo") == "Foo");
    CHECK(pl::kernel_name("append") == "Append");  // prelude names may be shadowed
    CHECK(pl::kernel_name("browse") == "BrowsePred");
    CHECK(pl::kernel_name("solve_all") == "SolveAllPred");
  }

  TEST_CASE("running translated programs") {
    CHECK(solve(queens(), "queens(8, Qs)", false) == std::vector<std::string>{"[[1 7 5 8 2 4 6 3]]"});
    CHECK(solve(family(), "children1(terach, K)", false) == std::vector<std::string>{"[[abraham]]"});
    CHECK(solve(family(), "children1(haran, K)", false) == std::vector<std::string>{"[[milcah yiscah]]"});
    CHECK(solve(family(), "children2(K)", false) == std::vector<std::string>{"[[abraham isaac milcah yiscah]]"});
    CHECK(solve(family(), "children3(haran, K)", false) == std::vector<std::string>{"[[milcah yiscah]]"});
    CHECK(solve(family(), "father(X, Y)") ==
          std::vector<std::string>{"[sol(terach abraham) sol(abraham isaac) sol(haran milcah) sol(haran yiscah)]"});
    CHECK(solve(family(), "father(haran, milcah)") == std::vector<std::string>{"[yes]"});
    CHECK(solve(family(), "father(isaac, _)") == std::vector<std::string>{"nil"});
  }

  TEST_CASE("bagof with free variables as generators") {
    // the free variable gets its own choice point over the facts, so each
    // father's bag shows up once per fact of that father
    auto out = solve("father(a, x).\nfather(a, y).\nfather(b, z).\nkids(K) :- bagof(C, father(_F, C), K).\n"
                     "kids2(F, K) :- bagof(C, father(F, C), K).\n",
                     "kids2(F, K)", true, true);
    REQUIRE(out.size() == 1);
    CHECK(out[0] == "[sol(a [x y]) sol(a [x y]) sol(b [z])]");
  }

  TEST_CASE("agrees with the reference resolver") {
    const char* prog =
        "app([], L, L).\napp([X|A], B, [X|C]) :- app(A, B, C).\n"
        "len([], 0).\nlen([_|T], N) :- len(T, M), N is M + 1.\n";
    pl::Options o;
    auto clauses = pl::parse(prog);
    for (const char* q : {"app(X, Y, [1,2,3])", "app([1], [2], Z)", "len([a,b,c], N)", "app(X, [3], [1,2,3])"}) {
      oracle::Meta meta(clauses);
      auto want = meta.solve_all(pl::parse_query(q));
      std::string list = "[";
      for (std::size_t i = 0; i < want.size(); ++i) list += (i ? " " : "") + want[i];
      list = want.empty() ? "nil" : list + "]";
      CHECK_MESSAGE(solve(prog, q) == std::vector<std::string>{list}, q);
    }
  }
}
