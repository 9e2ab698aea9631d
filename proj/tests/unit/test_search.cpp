#include "doctest.h"
#include "ozk/runtime.hpp"
#include "support/run.hpp"

using namespace ozk;

namespace {
const char* kPick = "proc {Pick X} choice X=a [] X=b [] X=c end end\n";
}

TEST_SUITE("search") {
  TEST_CASE("SolveOne gives the first solution in a list") {
    CHECK(testing::run1(std::string(kPick) + "{Browse {SolveOne fun {$} {Pick $} end}}") == "[a]");
    CHECK(testing::run1("{Browse {SolveOne fun {$} fail end}}") == "nil");
  }

  TEST_CASE("SolveAll keeps depth first order") {
    CHECK(testing::run1(std::string(kPick) + "{Browse {SolveAll fun {$} {Pick $} end}}") == "[a b c]");
    CHECK(testing::run1(std::string(kPick) +
                        "{Browse {SolveAll fun {$} X Y in {Pick X} {Pick Y} if X==Y then fail end p(X Y) end}}") ==
          "[p(a b) p(a c) p(b a) p(b c) p(c a) p(c b)]");
  }

  TEST_CASE("solutions are copied out, bindings stay inside") {
    auto r = testing::run(std::string(kPick) + "Z={SolveAll fun {$} X in {Pick X} f(X _) end} {Browse Z}");
    CHECK(r.out == std::vector<std::string>{"[f(a _G1) f(b _G2) f(c _G3)]"});
  }

  TEST_CASE("lazy Solve computes on demand") {
    Runtime rt;
    rt.load(std::string(kPick) + "S={Solve fun {$} {Pick $} end} {Browse {Take S 1}}");
    CHECK(rt.run() == Outcome::AllDone);
    CHECK(rt.output() == std::vector<std::string>{"[a]"});
    CHECK(rt.render(rt.global("S")) == "a|_");
  }

  TEST_CASE("lazy Solve ends with nil") {
    CHECK(testing::run1(std::string(kPick) + "{Browse {Length {Solve fun {$} {Pick $} end}}}") == "3");
  }

  TEST_CASE("binding an outer variable inside search is an error") {
    auto r = testing::run("declare X in {Browse {SolveAll fun {$} X=1 a end}}");
    CHECK(r.outcome == Outcome::Failed);
    CHECK(r.failure.find("Escape") != std::string::npos);
  }

  TEST_CASE("nested engines") {
    CHECK(testing::run1(std::string(kPick) +
                        "{Browse {SolveAll fun {$} X in {Pick X} n(X {Length {SolveAll fun {$} {Pick $} end}}) end}}") ==
          "[n(a 3) n(b 3) n(c 3)]");
  }

  TEST_CASE("deep guards commit to the first entailed arm") {
    const char* src =
        "proc {C X R} if Y in X=a(Y) then R=first(Y) elseif X==b then R=second else R=other end end\n"
        "{Browse {C a(1)}} {Browse {C b}} {Browse {C c}}";
    CHECK(testing::run(src).out == std::vector<std::string>{"first(1)", "second", "other"});
  }

  TEST_CASE("deep guard waits on undetermined input") {
    const char* src =
        "proc {C X R} if Y in X=a(Y) then R=yes(Y) else R=no end end\n"
        "declare X R in thread {C X R} end {Delay 10} X=a(1) {Wait R} {Browse R}";
    CHECK(testing::run1(src) == "yes(1)");
  }

  TEST_CASE("queens 8 first solution") {
    std::string src = testing::read_text(std::string(OZK_EXAMPLES) + "/queens.ozk");
    CHECK(testing::run1(src) == "[[1 7 5 8 2 4 6 3]]");
  }

  TEST_CASE("append in several modes") {
    std::string src = testing::read_text(std::string(OZK_EXAMPLES) + "/append.ozk");
    auto r = testing::run(src);
    CHECK(r.out == std::vector<std::string>{"[1 2 3]", "[1 2]",
                                            "[pair(nil [1 2 3]) pair([1] [2 3]) pair([1 2] [3]) pair([1 2 3] nil)]"});
  }
}
