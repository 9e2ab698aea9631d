#include <random>

#include "doctest.h"
#include "oracles/bisim_oracle.hpp"
#include "ozk/render.hpp"
#include "ozk/store.hpp"

using namespace ozk;

namespace {

Ref f1(Store& s, const char* l, Ref a) { return s.make_compound(intern(l), std::vector<Ref>{a}); }
Ref f2(Store& s, const char* l, Ref a, Ref b) { return s.make_compound(intern(l), std::vector<Ref>{a, b}); }

// random graph of `n` binary nodes over labels f/g and leaves a/b; returns node refs
std::vector<Ref> random_graph(Store& s, std::mt19937& rng, int n) {
  std::vector<Ref> nodes;
  std::uniform_int_distribution<int> lab(0, 1);
  for (int i = 0; i < n; ++i) nodes.push_back(s.make_compound_uninit(intern(lab(rng) ? "f" : "g"), 2));
  std::uniform_int_distribution<int> pick(0, n + 1);
  for (Ref r : nodes)
    for (std::uint32_t k = 0; k < 2; ++k) {
      int p = pick(rng);
      s.set_arg(r, k, p < n ? nodes[static_cast<std::size_t>(p)] : s.make_atom(p == n ? "a" : "b"));
    }
  return nodes;
}

}  // namespace

TEST_SUITE("store") {
  TEST_CASE("variables bind greater to lesser") {
    Store s;
    Ref x = s.new_var(), y = s.new_var();
    CHECK(s.var_id(x) < s.var_id(y));
    REQUIRE(s.unify(x, y).ok());
    CHECK(s.deref(y) == x);
    CHECK(s.deref(x) == x);
    REQUIRE(s.unify(y, s.make_int(3)).ok());
    CHECK(s.int_value(s.deref(x)) == 3);
  }

  TEST_CASE("unify structures and clash") {
    Store s;
    Ref x = s.new_var(), y = s.new_var();
    Ref a = f2(s, "f", x, s.make_atom("b"));
    Ref b = f2(s, "f", s.make_atom("a"), y);
    CHECK(s.unify(a, b).ok());
    CHECK(render(s, a) == "f(a b)");
    CHECK(s.unify(a, f2(s, "f", s.make_atom("a"), s.make_atom("c"))).status == UnifyResult::Status::Failure);
    CHECK_FALSE(s.unify(f1(s, "f", x), f1(s, "g", x)).ok());
    CHECK_FALSE(s.unify(f1(s, "f", x), f2(s, "f", x, x)).ok());
  }

  TEST_CASE("rational trees without occurs check") {
    Store s;
    Ref x = s.new_var(), y = s.new_var();
    REQUIRE(s.unify(x, f1(s, "f", x)).ok());
    REQUIRE(s.unify(y, f1(s, "f", f1(s, "f", y))).ok());
    CHECK(s.unify(x, y).ok());
    CHECK(s.equals(x, y).kind == EqResult::Kind::True);
    CHECK(render(s, x) == "@1=f(@1)");
  }

  TEST_CASE("equals three valued") {
    Store s;
    Ref x = s.new_var();
    CHECK(s.equals(f1(s, "f", x), f1(s, "g", x)).kind == EqResult::Kind::False);
    auto e = s.equals(f1(s, "f", x), f1(s, "f", s.make_int(1)));
    CHECK(e.kind == EqResult::Kind::Undetermined);
    REQUIRE(e.suspend_on.size() == 1);
    CHECK(e.suspend_on[0] == x);
    CHECK(s.equals(x, x).kind == EqResult::Kind::True);
  }

  TEST_CASE("random cyclic graphs: equals agrees with bisimulation") {
    std::mt19937 rng(2024);
    int agree = 0, equal_pairs = 0;
    for (int round = 0; round < 300; ++round) {
      Store s;
      auto nodes = random_graph(s, rng, 2 + round % 6);
      std::uniform_int_distribution<std::size_t> pick(0, nodes.size() - 1);
      Ref a = nodes[pick(rng)], b = nodes[pick(rng)];
      bool want = oracle::bisimilar(s, a, b);
      auto got = s.equals(a, b).kind;
      CHECK(got != EqResult::Kind::Undetermined);
      CHECK((got == EqResult::Kind::True) == want);
      agree += (got == EqResult::Kind::True) == want;
      equal_pairs += want;
      // unification of ground graphs succeeds exactly on bisimilar pairs
      CHECK(s.unify(a, b).ok() == want);
    }
    CHECK(agree == 300);
    CHECK(equal_pairs > 20);
  }

  TEST_CASE("trail restores bindings and escape is reported") {
    Store s;
    Ref outer = s.new_var();
    std::vector<Ref> trail;
    Ref mark = static_cast<Ref>(s.size());
    BindScope scope{&trail, mark, 0};
    Ref inner = s.new_var();
    CHECK(s.unify(inner, s.make_int(1), &scope).ok());
    CHECK(s.unify(outer, s.make_int(2), &scope).ok());
    CHECK(trail.size() == 1);
    s.undo_trail(trail, 0);
    CHECK(s.is_unbound(outer));

    BindScope sealed{&trail, mark, mark};
    auto r = s.unify(outer, s.make_int(2), &sealed);
    CHECK(r.status == UnifyResult::Status::Escape);
    CHECK(r.var == outer);
  }

  TEST_CASE("binding wakes waiters") {
    Store s;
    Ref x = s.new_var();
    s.add_waiter(x, 7);
    CHECK(s.needed(x));
    auto w = s.bind_and_wake(x, s.make_atom("a"));
    REQUIRE(w.size() == 1);
    CHECK(w[0] == 7);
    CHECK_THROWS_AS(s.bind_and_wake(x, s.make_atom("b")), StoreError);
  }

  TEST_CASE("proxy binding is remote") {
    Store s(1);
    Ref p = s.new_proxy(VarId{0, 5});
    auto r = s.unify(p, s.make_int(1));
    CHECK(r.status == UnifyResult::Status::Remote);
    CHECK(r.var == p);
    s.bind_authoritative(p, s.make_int(1));
    CHECK(s.int_value(s.deref(p)) == 1);
  }

  TEST_CASE("lists") {
    Store s;
    std::vector<Ref> items{s.make_int(1), s.make_int(2)};
    Ref l = s.list(items);
    std::vector<Ref> back;
    CHECK(s.as_list(l, back));
    CHECK(back.size() == 2);
    CHECK(render(s, l) == "[1 2]");
    Ref partial = s.list(items, s.new_var());
    CHECK_FALSE(s.as_list(partial, back));
    CHECK(render(s, partial) == "1|2|_");
    CHECK(render(s, s.make_int(-5)) == "~5");
  }

  TEST_CASE("standard order") {
    Store s;
    Ref v = s.new_var();
    CHECK(compare_terms(s, v, s.make_int(1)) < 0);
    CHECK(compare_terms(s, s.make_int(9), s.make_atom("a")) < 0);
    CHECK(compare_terms(s, s.make_atom("b"), s.make_atom("a")) > 0);
    CHECK(compare_terms(s, s.make_atom("z"), f1(s, "a", v)) < 0);
    CHECK(compare_terms(s, f1(s, "z", v), f2(s, "a", v, v)) < 0);
  }

  TEST_CASE("copy across stores is bisimilar") {
    Store a, b(1);
    Ref x = a.new_var();
    a.unify(x, f2(a, "f", x, a.make_atom("k")));
    Ref y = copy_graph(a, x, b, [&](Ref) { return b.new_var(); });
    CHECK(bisimilar(a, x, b, y));
    CHECK(render(b, y) == "@1=f(@1 k)");
  }
}
