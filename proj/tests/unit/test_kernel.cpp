#include "doctest.h"
#include "ozk/compiler.hpp"
#include "ozk/runtime.hpp"
#include "ozk/syntax.hpp"
#include "support/run.hpp"

using namespace ozk;

namespace {

std::shared_ptr<const ProcCode> compile_one(const std::string& src) {
  static GlobalEnv env;
  auto prog = parse_program(src);
  REQUIRE(prog.size() == 1);
  return compile_procedure(*prog[0], env);
}

}  // namespace

TEST_SUITE("kernel") {
  TEST_CASE("print then parse gives the same phrases") {
    for (const char* f : {"queens.ozk", "append.ozk", "stream.ozk", "guards.ozk", "lazy.ozk", "solve.ozk"}) {
      std::string src = testing::read_text(std::string(OZK_EXAMPLES) + "/" + f);
      REQUIRE_FALSE(src.empty());
      auto a = parse_program(src);
      auto b = parse_program(print_program(a));
      CHECK_MESSAGE(same_structure(a, b), f);
    }
  }

  TEST_CASE("syntax errors carry positions") {
    try {
      parse_program("X = \n  f(");
      FAIL("no error");
    } catch (const SyntaxError& e) {
      CHECK(e.pos().line == 2);
    }
    CHECK_THROWS_AS(parse_program("if X then else"), SyntaxError);
    CHECK_THROWS_AS(parse_program("proc {P X} skip"), SyntaxError);
  }

  TEST_CASE("operators") {
    CHECK(testing::run1("{Browse 1+2*3}") == "7");
    CHECK(testing::run1("{Browse (1+2)*3}") == "9");
    CHECK(testing::run1("{Browse 7 div 2}") == "3");
    CHECK(testing::run1("{Browse 7 mod 2}") == "1");
    CHECK(testing::run1("{Browse 1-2-3}") == "~4");
    CHECK(testing::run1("{Browse 1<2 andthen 2<1}") == "false");
    CHECK(testing::run1("{Browse 1>2 orelse 2>1}") == "true");
    CHECK(testing::run1("{Browse a\\=b}") == "true");
  }

  TEST_CASE("function desugars to procedure with result parameter") {
    auto f = compile_one("fun {Inc X} X+1 end");
    auto p = compile_one("proc {Inc X R} R=X+1 end");
    CHECK(f->arity() == 2);
    CHECK(f->from_function);
    CHECK(same_structure(*f->body, *p->body));
  }

  TEST_CASE("nested calls and the $ marker") {
    CHECK(testing::run1("fun {F X} X*2 end {Browse {F {F 3}}}") == "12");
    CHECK(testing::run1("proc {P X} X=5 end {Browse {P $}}") == "5");
    CHECK(testing::run1("X = f(a {Length [1 2]}) {Browse X}") == "f(a 2)");
  }

  TEST_CASE("records, lists, case") {
    CHECK(testing::run1("case f(1 2) of f(A B) then {Browse A+B} end") == "3");
    CHECK(testing::run1("case [1 2 3] of X|Xr then {Browse Xr} end") == "[2 3]");
    CHECK(testing::run1("case a of b then {Browse 1} [] a then {Browse 2} else {Browse 3} end") == "2");
    CHECK(testing::run1("case q of b then {Browse 1} else {Browse 3} end") == "3");
    auto r = testing::run("case q of b then skip end");
    CHECK(r.outcome == Outcome::Failed);
  }

  TEST_CASE("local scoping and closures") {
    CHECK(testing::run1("local X in X=1 local X in X=2 end {Browse X} end") == "1");
    CHECK(testing::run1("fun {Adder N} fun {$ X} X+N end end A={Adder 10} {Browse {A 5}}") == "15");
  }

  TEST_CASE("compile errors") {
    Runtime rt;
    CHECK_THROWS_AS(rt.load("local X in {Foo X} end"), CompileError);
    CHECK_THROWS_AS(rt.load("proc {P X} X=1 end {P 1 2}"), CompileError);
  }

  TEST_CASE("user definitions shadow the prelude") {
    CHECK(testing::run1("fun {Length Xs} 42 end {Browse {Length nil}}") == "42");
  }

  TEST_CASE("top level unification is visible to later statements") {
    auto r = testing::run("X=f(Y) Y=3 {Browse X}");
    CHECK(r.out == std::vector<std::string>{"f(3)"});
  }
}
