#include "doctest.h"
#include "oracles/bisim_oracle.hpp"
#include "ozk/dist.hpp"
#include "ozk/render.hpp"
#include "support/run.hpp"

using namespace ozk;
namespace d = ozk::dist;

namespace {

const char* kGenMap =
    "fun {Gen L H} {Delay 1000} if L>H then nil else L|{Gen L+1 H} end end\n"
    "thread Xs={Gen 1 10} end\n"
    "thread Ys={Map Xs fun {$ X} X*X end} end\n"
    "{Browse Ys}\n";

// a simulation of `n` nodes with nothing loaded
std::unique_ptr<d::Simulation> bare(std::size_t n, std::uint64_t net_seed = 0) {
  d::SimOptions o;
  o.nodes = n;
  o.net_seed = net_seed;
  o.delivery = net_seed ? d::Delivery::SeededShuffle : d::Delivery::FifoPerLink;
  auto sim = std::make_unique<d::Simulation>(o);
  sim->load("", d::parse_placement("main=0"));
  return sim;
}

// exported fresh variable owned by node `n`
VarId fresh(d::Simulation& sim, NodeId n) { return sim.export_var(n, sim.node(n).store().new_var()); }

bool same_rep(d::Simulation& sim, NodeId n, VarId a, VarId b) {
  Store& s = sim.node(n).store();
  return s.equals(sim.import(n, a), sim.import(n, b)).kind == EqResult::Kind::True;
}

std::uint64_t total(const d::SimReport& r) {
  std::uint64_t t = 0;
  for (auto& [k, v] : r.messages) t += v;
  return t;
}

}  // namespace

TEST_SUITE("dist") {
  TEST_CASE("placement syntax") {
    auto p = d::parse_placement("1=0,2=1,main=2");
    CHECK(p.node_of(1) == 0);
    CHECK(p.node_of(2) == 1);
    CHECK(p.main == 2);
    CHECK(p.max_node() == 2);
    CHECK_THROWS_AS(d::parse_placement("x=1"), d::DistError);
  }

  TEST_CASE("snapshot round trip is bisimilar") {
    Store a, b(1);
    Ref x = a.new_var(), free = a.new_var();
    a.unify(x, a.make_compound(intern("f"), std::vector<Ref>{x, free, a.make_int(-3)}));
    std::vector<Ref> seen;
    auto snap = d::encode(a, x, [&](Ref v) { seen.push_back(v); });
    CHECK(seen.size() == 1);
    REQUIRE(snap.frontier().size() == 1);
    CHECK(snap.frontier()[0] == a.var_id(free));
    Ref y = d::decode(b, snap, [&](const VarId& id) { return b.new_proxy(id); });
    CHECK(bisimilar(a, x, b, y));
    CHECK(render(b, y) == "@1=f(@1 _G1 ~3)");
  }

  TEST_CASE("procedures cannot be shipped") {
    Runtime rt;
    rt.load("proc {P} skip end");
    rt.run();
    CHECK_THROWS_AS(d::encode(rt.store(), rt.global("P")), d::DistError);
  }

  TEST_CASE("empty program: no messages") {
    d::SimOptions o;
    d::Simulation sim(o);
    sim.load("", d::parse_placement("main=0"));
    auto r = sim.run();
    CHECK(r.outcome == Outcome::AllDone);
    CHECK(total(r) == 0);
  }

  TEST_CASE("register, bind, notify") {
    auto sim = bare(2);
    VarId x = fresh(*sim, 0);
    Ref p = sim->import(1, x);
    sim->import(1, x);  // idempotent
    sim->run();
    CHECK(sim->report().messages.at("Register") == 1);
    sim->node(0).spawn_unify(sim->import(0, x), sim->node(0).store().make_int(4));
    sim->run();
    CHECK(sim->node(1).render(p) == "4");

    // registering an already bound variable answers with its value
    VarId y = fresh(*sim, 0);
    sim->node(0).spawn_unify(sim->import(0, y), sim->node(0).store().make_atom("done"));
    sim->run();
    Ref q = sim->import(1, y);
    sim->run();
    CHECK(sim->node(1).render(q) == "done");
  }

  TEST_CASE("variables on two nodes unified on a third") {
    auto sim = bare(4);
    VarId x = fresh(*sim, 1), y = fresh(*sim, 2);
    for (NodeId n : {1u, 2u, 3u}) {
      sim->import(n, x);
      sim->import(n, y);
    }
    sim->run();
    sim->node(3).spawn_unify(sim->import(3, x), sim->import(3, y));
    auto r = sim->run();
    CHECK(r.outcome == Outcome::AllDone);
    CHECK(r.messages.count("UnifyVarVar"));
    for (NodeId n : {1u, 2u, 3u}) CHECK_MESSAGE(same_rep(*sim, n, x, y), "node " << n);
    // Y, the greater, now leads to X on its own node
    Store& s2 = sim->node(2).store();
    CHECK(s2.var_id(s2.deref(sim->import(2, y))) == x);

    sim->node(2).spawn_unify(sim->import(2, y), s2.make_int(7));
    sim->run();
    for (NodeId n : {1u, 2u, 3u}) CHECK(sim->node(n).render(sim->import(n, x)) == "7");
  }

  TEST_CASE("unify a variable with itself sends nothing") {
    auto sim = bare(2);
    VarId x = fresh(*sim, 0);
    Ref p = sim->import(1, x);
    sim->run();
    auto before = total(sim->report());
    sim->node(1).spawn_unify(p, p);
    auto r = sim->run();
    CHECK(total(r) == before);
  }

  TEST_CASE("three way chain shares one representative") {
    auto sim = bare(3, 17);
    VarId x = fresh(*sim, 0), y = fresh(*sim, 1), z = fresh(*sim, 2);
    for (NodeId n : {0u, 1u, 2u})
      for (VarId v : {x, y, z})
        if (v.origin_node != n) sim->import(n, v);
    sim->node(0).spawn_unify(sim->import(0, x), sim->import(0, y));
    sim->node(1).spawn_unify(sim->import(1, y), sim->import(1, z));
    CHECK(sim->run().outcome == Outcome::AllDone);
    for (NodeId n : {0u, 1u, 2u}) {
      CHECK(same_rep(*sim, n, x, y));
      CHECK(same_rep(*sim, n, y, z));
    }
  }

  TEST_CASE("concurrent equal binds are serialized by the owner") {
    for (std::uint64_t seed : {0ull, 1ull, 2ull, 3ull}) {
      auto sim = bare(3, seed);
      VarId x = fresh(*sim, 0);
      Ref a = sim->import(1, x), b = sim->import(2, x);
      sim->node(1).spawn_unify(a, sim->node(1).store().make_int(10));
      sim->node(2).spawn_unify(b, sim->node(2).store().make_int(10));
      auto r = sim->run();
      CHECK(r.outcome == Outcome::AllDone);
      for (NodeId n : {0u, 1u, 2u}) CHECK(sim->node(n).render(sim->import(n, x)) == "10");
    }
  }

  TEST_CASE("conflicting binds fail") {
    auto sim = bare(3);
    VarId x = fresh(*sim, 0);
    Ref a = sim->import(1, x), b = sim->import(2, x);
    sim->node(1).spawn_unify(a, sim->node(1).store().make_int(1));
    sim->node(2).spawn_unify(b, sim->node(2).store().make_int(2));
    CHECK(sim->run().outcome == Outcome::Failed);
  }

  TEST_CASE("producer and consumer on two nodes") {
    d::SimOptions o;
    d::Simulation sim(o);
    sim.load(kGenMap, d::parse_placement("1=0,2=1,main=0"));
    auto r = sim.run();
    CHECK(r.outcome == Outcome::AllDone);
    CHECK(r.all_outputs() == std::vector<std::string>{"[1 4 9 16 25 36 49 64 81 100]"});
    CHECK(r.messages.at("BindNotify") > 0);
  }

  TEST_CASE("single node placement matches the plain runtime") {
    const char* programs[] = {
        kGenMap,
        "thread Y=X+1 end thread X=10 end {Wait Y} {Browse Y}",
        "X=f(X) Y=f(f(Y)) {Browse X==Y}",
        "fun lazy {Ints N} N|{Ints N+1} end S={Ints 1} {Browse {Take S 5}}",
        "proc {P X} choice X=1 [] X=2 end end {Browse {SolveAll fun {$} {P $} end}}",
    };
    for (const char* src : programs) {
      d::SimOptions o;
      d::Simulation sim(o);
      sim.load(src, d::parse_placement("main=0"));
      auto r = sim.run();
      auto plain = testing::run(src);
      CHECK_MESSAGE(r.all_outputs() == plain.out, src);
      CHECK(r.outcome == plain.outcome);
    }
  }

  TEST_CASE("search may not bind a remote variable") {
    d::SimOptions o;
    d::Simulation sim(o);
    sim.load("declare X in thread {Browse {SolveAll fun {$} X=1 a end}} end", d::parse_placement("1=1,main=0"));
    auto r = sim.run();
    CHECK(r.outcome == Outcome::Failed);
  }

  TEST_CASE("net trace lines") {
    d::SimOptions o;
    d::Simulation sim(o);
    sim.load("thread X=1 end {Wait X} {Browse X}", d::parse_placement("1=1,main=0"));
    auto r = sim.run();
    CHECK(r.all_outputs() == std::vector<std::string>{"1"});
    REQUIRE_FALSE(r.trace.empty());
    CHECK(r.trace.size() == r.delivered);
  }

  TEST_CASE("replicas agree at quiescence") {
    d::SimOptions o;
    o.net_seed = 11;
    o.delivery = d::Delivery::SeededShuffle;
    d::Simulation sim(o);
    sim.load(kGenMap, d::parse_placement("1=1,2=2,main=0"));
    sim.run();
    for (auto& [id, reps] : sim.replicas())
      for (std::size_t i = 1; i < reps.size(); ++i)
        CHECK(bisimilar(sim.node(reps[0].first).store(), reps[0].second, sim.node(reps[i].first).store(),
                        reps[i].second));
  }
}
