#include <algorithm>
#include <unordered_set>

#include "ozk/render.hpp"
#include "ozk/runtime.hpp"

namespace ozk {

namespace {

using R = BuiltinResult;

Ref det(Runtime& rt, Ref r) { return rt.store().deref(r); }

R browse(Runtime& rt, Thread& th, std::span<const Ref> a) {
  rt.emit(a[0], th.id, true);
  return R::done();
}

R show(Runtime& rt, Thread& th, std::span<const Ref> a) {
  rt.emit(a[0], th.id, false);
  return R::done();
}

R wait(Runtime& rt, Thread&, std::span<const Ref> a) {
  Ref v = det(rt, a[0]);
  if (rt.store().is_unbound(v)) return R::suspend({v});
  return R::done();
}

R wait_needed(Runtime& rt, Thread&, std::span<const Ref> a) {
  Store& s = rt.store();
  Ref v = det(rt, a[0]);
  if (s.is_unbound(v) && !s.needed(v)) return {R::Status::SuspendNeed, {v}, 0};
  rt.count_expansion();
  return R::done();
}

R delay(Runtime& rt, Thread&, std::span<const Ref> a) {
  Store& s = rt.store();
  Ref v = det(rt, a[0]);
  if (s.is_unbound(v)) return R::suspend({v});
  if (s.tag(v) != Tag::Int) rt.error("Delay expects an integer, got " + rt.render(v));
  std::int64_t ms = s.int_value(v);
  if (ms < 0) rt.error("Delay with negative time " + std::to_string(ms));
  if (ms == 0) return {R::Status::Yield, {}, 0};
  return {R::Status::Sleep, {}, ms};
}

// Resolves the goal closure of SolveOne/SolveAll/Solve. Returns kNoRef when
// the goal is still unbound.
Ref goal_closure(Runtime& rt, Ref g, const char* who) {
  Store& s = rt.store();
  Ref v = det(rt, g);
  if (s.is_unbound(v)) return kNoRef;
  if (s.tag(v) != Tag::Closure || s.closure(v).arity != 1)
    rt.error(std::string(who) + " expects a one-argument procedure or a zero-argument function");
  return v;
}

R solve_one(Runtime& rt, Thread& th, std::span<const Ref> a) {
  Ref g = goal_closure(rt, a[0], "SolveOne");
  if (g == kNoRef) return R::suspend({det(rt, a[0])});
  rt.start_engine(th, EngineMode::One, g, a[1]);
  return R::done();
}

R solve_all(Runtime& rt, Thread& th, std::span<const Ref> a) {
  Ref g = goal_closure(rt, a[0], "SolveAll");
  if (g == kNoRef) return R::suspend({det(rt, a[0])});
  rt.start_engine(th, EngineMode::All, g, a[1]);
  return R::done();
}

R solve_lazy(Runtime& rt, Thread& th, std::span<const Ref> a) {
  Ref g = goal_closure(rt, a[0], "Solve");
  if (g == kNoRef) return R::suspend({det(rt, a[0])});
  if (th.contexts.size() > 1) rt.error("ThreadInSearchError: Solve used inside a search goal or guard");
  rt.spawn_stream(g, a[1]);
  return R::done();
}

// First unbound variable reachable from t, or kNoRef.
Ref first_unbound(const Store& s, Ref t) {
  std::vector<Ref> todo{t};
  std::unordered_set<Ref> seen;
  while (!todo.empty()) {
    Ref r = s.deref(todo.back());
    todo.pop_back();
    if (s.is_unbound(r)) return r;
    if (s.tag(r) != Tag::Compound || !seen.insert(r).second) continue;
    for (Ref x : s.args(r)) todo.push_back(x);
  }
  return kNoRef;
}

R sort(Runtime& rt, Thread& th, std::span<const Ref> a) {
  Store& s = rt.store();
  std::vector<Ref> items;
  Ref cur = det(rt, a[0]);
  std::unordered_set<Ref> seen;
  while (true) {
    if (s.is_unbound(cur)) return R::suspend({cur});
    if (s.is_atom(cur, atoms::nil())) break;
    if (s.tag(cur) != Tag::Compound || s.label(cur) != atoms::cons() || s.arity(cur) != 2 || !seen.insert(cur).second)
      rt.error("Sort expects a list, got " + rt.render(a[0]));
    items.push_back(s.arg(cur, 0));
    cur = s.deref(s.arg(cur, 1));
  }
  for (Ref x : items)
    if (Ref v = first_unbound(s, x); v != kNoRef) return R::suspend({v});
  std::stable_sort(items.begin(), items.end(), [&](Ref x, Ref y) { return compare_terms(s, x, y) < 0; });
  rt.push_unify(th, a[1], s.list(items));
  return R::done();
}

R is_det(Runtime& rt, Thread& th, std::span<const Ref> a) {
  Store& s = rt.store();
  bool d = !s.is_unbound(det(rt, a[0]));
  rt.push_unify(th, a[1], s.make_atom(d ? atoms::true_() : atoms::false_()));
  return R::done();
}

const BuiltinDef kTable[] = {
    {"Browse", 1, browse},     {"Show", 1, show},           {"Wait", 1, wait},
    {"WaitNeeded", 1, wait_needed}, {"Delay", 1, delay},    {"SolveOne", 2, solve_one},
    {"SolveAll", 2, solve_all}, {"Solve", 2, solve_lazy},   {"Sort", 2, sort},
    {"IsDet", 2, is_det},
};

constexpr std::string_view kPrelude = R"ozk(
fun {Map Xs F}
   case Xs of nil then nil
   [] X|Xr then {F X}|{Map Xr F}
   end
end
fun {Filter Xs P}
   case Xs of nil then nil
   [] X|Xr then
      if {P X} then X|{Filter Xr P} else {Filter Xr P} end
   end
end
fun {FoldL Xs F Acc}
   case Xs of nil then Acc
   [] X|Xr then {FoldL Xr F {F Acc X}}
   end
end
proc {ForAll Xs P}
   case Xs of nil then skip
   [] X|Xr then {P X} {ForAll Xr P}
   end
end
fun {Append Xs Ys}
   case Xs of nil then Ys
   [] X|Xr then X|{Append Xr Ys}
   end
end
fun {Take Xs N}
   if N =< 0 then nil
   else
      case Xs of nil then nil
      [] X|Xr then X|{Take Xr N-1}
      end
   end
end
fun {Drop Xs N}
   if N =< 0 then Xs
   else
      case Xs of nil then nil
      [] _|Xr then {Drop Xr N-1}
      end
   end
end
fun {Nth Xs N}
   case Xs of X|Xr then
      if N == 1 then X else {Nth Xr N-1} end
   end
end
fun {Length Xs}
   {FoldL Xs fun {$ A X} A+1 end 0}
end
fun {Reverse Xs}
   {FoldL Xs fun {$ A X} X|A end nil}
end
fun {Member X Xs}
   case Xs of nil then false
   [] Y|Yr then if X == Y then true else {Member X Yr} end
   end
end
fun {Uniq Xs}
   case Xs of X|Y|Xr then
      if X == Y then {Uniq Y|Xr} else X|{Uniq Y|Xr} end
   else Xs
   end
end
fun {Not B}
   if B then false else true end
end
)ozk";

}  // namespace

std::span<const BuiltinDef> builtin_table() { return kTable; }

std::string_view prelude_source() { return kPrelude; }

}  // namespace ozk
