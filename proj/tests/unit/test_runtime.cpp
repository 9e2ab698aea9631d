#include "doctest.h"
#include "ozk/runtime.hpp"
#include "support/run.hpp"

using namespace ozk;

TEST_SUITE("runtime") {
  TEST_CASE("dataflow suspension and wake") {
    auto r = testing::run("thread Y=X+1 end thread X=10 end {Wait Y} {Browse Y}");
    CHECK(r.outcome == Outcome::AllDone);
    CHECK(r.out == std::vector<std::string>{"11"});
  }

  TEST_CASE("deadlock names the blocked thread and variable") {
    Runtime rt;
    rt.load("Y=X+1");
    CHECK(rt.run() == Outcome::Deadlock);
    std::string rep = rt.deadlock_report();
    CHECK(rep.find("X") != std::string::npos);
    CHECK(rt.blocked_threads().size() == 1);
  }

  TEST_CASE("empty program and skip") {
    CHECK(testing::run("skip").outcome == Outcome::AllDone);
    CHECK(testing::run("").out.empty());
  }

  TEST_CASE("failure") {
    auto r = testing::run("X=1 X=2");
    CHECK(r.outcome == Outcome::Failed);
    CHECK_FALSE(r.failure.empty());
    CHECK(testing::run("fail").outcome == Outcome::Failed);
    CHECK(testing::run("{Browse 1 div 0}").outcome == Outcome::Failed);
  }

  TEST_CASE("virtual clock") {
    auto r = testing::run("{Delay 500} {Delay 250} {Browse done}");
    CHECK(r.clock == 750);
    CHECK(r.out == std::vector<std::string>{"done"});
    // sleeping threads interleave by wake time
    auto s = testing::run("thread {Delay 300} {Browse b} end thread {Delay 100} {Browse a} end");
    CHECK(s.out == std::vector<std::string>{"a", "b"});
    CHECK(s.clock == 300);
  }

  TEST_CASE("step limit") {
    RuntimeOptions o;
    o.max_steps = 10'000;
    auto r = testing::run("proc {Loop} {Loop} end {Loop}", o);
    CHECK(r.outcome == Outcome::StepLimit);
  }

  TEST_CASE("tail calls keep the stack flat") {
    Runtime rt;
    rt.load("proc {Count N} if N>0 then {Count N-1} end end {Count 100000}");
    CHECK(rt.run() == Outcome::AllDone);
    std::size_t depth = 0;
    for (ThreadId t = 1; t <= rt.thread_count(); ++t) depth = std::max(depth, rt.thread(t).max_depth);
    CHECK(depth <= 8);
  }

  TEST_CASE("random scheduler is reproducible") {
    RuntimeOptions o;
    o.policy = SchedPolicy::Random;
    o.seed = 99;
    const char* src = "thread {Browse a} end thread {Browse b} end thread {Browse c} end";
    CHECK(testing::run(src, o).out == testing::run(src, o).out);
  }

  TEST_CASE("stepping by slices and clock") {
    Runtime rt;
    rt.load("thread {Delay 1000} X=1 end {Wait X} {Browse X}");
    while (rt.run_slice()) {
    }
    CHECK(rt.output().empty());
    auto t = rt.next_timer();
    REQUIRE(t);
    CHECK(*t == 1000);
    rt.advance_clock(*t);
    while (rt.run_slice()) {
    }
    CHECK(rt.output() == std::vector<std::string>{"1"});
    CHECK(rt.settle_outcome() == Outcome::AllDone);
  }

  TEST_CASE("threads suspended after main finishes are a deadlock") {
    auto r = testing::run("declare Z in thread {Wait Z} end {Browse hi}");
    CHECK(r.outcome == Outcome::Deadlock);
    CHECK(r.out == std::vector<std::string>{"hi"});
  }

  TEST_CASE("trace records scheduling events") {
    RuntimeOptions o;
    o.trace = true;
    Runtime rt(o);
    rt.load("thread X=1 end {Wait X}");
    rt.run();
    CHECK_FALSE(rt.trace().empty());
  }
}
