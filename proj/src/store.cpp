#include "ozk/store.hpp"

#include <algorithm>
#include <deque>
#include <mutex>
#include <unordered_set>
#include <utility>

namespace ozk {

// --- atoms -----------------------------------------------------------------

namespace {

struct AtomTable {
  std::mutex mu;
  std::deque<std::string> names;
  std::unordered_map<std::string_view, AtomId> index;
};

AtomTable& atom_table() {
  static AtomTable table;
  return table;
}

std::uint64_t pair_key(Ref a, Ref b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(a) << 32) | b;
}

}  // namespace

AtomId intern(std::string_view name) {
  auto& t = atom_table();
  std::lock_guard lock(t.mu);
  if (auto it = t.index.find(name); it != t.index.end()) return it->second;
  t.names.emplace_back(name);
  auto id = static_cast<AtomId>(t.names.size() - 1);
  t.index.emplace(t.names.back(), id);
  return id;
}

const std::string& atom_name(AtomId id) {
  auto& t = atom_table();
  std::lock_guard lock(t.mu);
  return t.names.at(id);
}

namespace atoms {
AtomId nil() {
  static const AtomId id = intern("nil");
  return id;
}
AtomId cons() {
  static const AtomId id = intern("|");
  return id;
}
AtomId true_() {
  static const AtomId id = intern("true");
  return id;
}
AtomId false_() {
  static const AtomId id = intern("false");
  return id;
}
AtomId unit() {
  static const AtomId id = intern("unit");
  return id;
}
}  // namespace atoms

std::string to_string(const VarId& id) {
  return std::to_string(id.origin_node) + ":" + std::to_string(id.seq);
}

// --- construction ----------------------------------------------------------

Store::Store(NodeId origin_node) : origin_(origin_node) {
  nodes_.reserve(1 << 12);
  args_.reserve(1 << 12);
}

Ref Store::push(Node n) {
  if (nodes_.size() >= kNoRef) throw StoreError("store exhausted");
  nodes_.push_back(n);
  return static_cast<Ref>(nodes_.size() - 1);
}

Ref Store::new_var() {
  Ref r = static_cast<Ref>(nodes_.size());
  return push(Node{Tag::Var, 0, r, origin_, next_seq_++});
}

Ref Store::new_proxy(VarId id) {
  Ref r = static_cast<Ref>(nodes_.size());
  return push(Node{Tag::Var, kProxy, r, id.origin_node, id.seq});
}

Ref Store::make_atom(AtomId atom) {
  if (auto it = atom_cache_.find(atom); it != atom_cache_.end()) return it->second;
  Ref r = push(Node{Tag::Atom, 0, atom, 0, 0});
  atom_cache_.emplace(atom, r);
  return r;
}

Ref Store::make_int(std::int64_t value) {
  constexpr std::int64_t kLo = -16, kHi = 1024;
  if (value >= kLo && value < kHi) {
    if (small_ints_.empty()) small_ints_.assign(kHi - kLo, kNoRef);
    Ref& slot = small_ints_[value - kLo];
    if (slot == kNoRef) slot = push(Node{Tag::Int, 0, 0, 0, static_cast<std::uint64_t>(value)});
    return slot;
  }
  return push(Node{Tag::Int, 0, 0, 0, static_cast<std::uint64_t>(value)});
}

Ref Store::make_compound(AtomId label, std::span<const Ref> args) {
  if (args.empty()) return make_atom(label);
  auto offset = static_cast<std::uint64_t>(args_.size());
  args_.insert(args_.end(), args.begin(), args.end());
  return push(Node{Tag::Compound, 0, label, static_cast<std::uint32_t>(args.size()), offset});
}

Ref Store::make_compound_uninit(AtomId label, std::uint32_t arity) {
  auto offset = static_cast<std::uint64_t>(args_.size());
  args_.resize(args_.size() + arity, kNoRef);
  return push(Node{Tag::Compound, 0, label, arity, offset});
}

void Store::set_arg(Ref compound, std::uint32_t i, Ref value) {
  args_[nodes_[compound].c + i] = value;
}

Ref Store::make_closure(ClosureData data) {
  closures_.push_back(std::move(data));
  return push(Node{Tag::Closure, 0, static_cast<std::uint32_t>(closures_.size() - 1), 0, 0});
}

Ref Store::cons(Ref head, Ref tail) {
  Ref args[2] = {head, tail};
  return make_compound(atoms::cons(), args);
}

Ref Store::list(std::span<const Ref> items, Ref tail) {
  Ref acc = tail == kNoRef ? nil() : tail;
  for (auto it = items.rbegin(); it != items.rend(); ++it) acc = cons(*it, acc);
  return acc;
}

// --- inspection ------------------------------------------------------------

Ref Store::deref(Ref r) const {
  while (nodes_[r].tag == Tag::Var) {
    Ref next = nodes_[r].a;
    if (next == r) return r;
    r = next;
  }
  return r;
}

bool Store::is_unbound(Ref r) const {
  Ref d = deref(r);
  return nodes_[d].tag == Tag::Var;
}

VarId Store::var_id(Ref var) const {
  const Node& n = nodes_[var];
  return VarId{n.b, n.c};
}

std::span<const Ref> Store::args(Ref r) const {
  const Node& n = nodes_[r];
  return {args_.data() + n.c, n.b};
}

bool Store::as_list(Ref r, std::vector<Ref>& out) const {
  out.clear();
  std::unordered_set<Ref> seen;
  r = deref(r);
  while (true) {
    if (is_atom(r, atoms::nil())) return true;
    if (tag(r) != Tag::Compound || label(r) != atoms::cons() || arity(r) != 2) return false;
    if (!seen.insert(r).second) return false;
    out.push_back(arg(r, 0));
    r = deref(arg(r, 1));
  }
}

// --- binding ---------------------------------------------------------------

void Store::wake_all(Ref var, std::vector<ThreadId>& woken) {
  if (auto it = waiters_.find(var); it != waiters_.end()) {
    woken.insert(woken.end(), it->second.begin(), it->second.end());
    waiters_.erase(it);
  }
  if (auto it = need_waiters_.find(var); it != need_waiters_.end()) {
    woken.insert(woken.end(), it->second.begin(), it->second.end());
    need_waiters_.erase(it);
  }
}

void Store::propagate_need(Ref from, Ref to, std::vector<ThreadId>& woken) {
  if (!(nodes_[from].flags & kNeeded)) return;
  Ref target = deref(to);
  if (nodes_[target].tag != Tag::Var || (nodes_[target].flags & kNeeded)) return;
  nodes_[target].flags |= kNeeded;
  if (auto it = need_waiters_.find(target); it != need_waiters_.end()) {
    woken.insert(woken.end(), it->second.begin(), it->second.end());
    need_waiters_.erase(it);
  }
}

UnifyResult::Status Store::bind(Ref var, Ref term, const BindScope* scope,
                                std::vector<ThreadId>& woken, Ref& blocked) {
  if (scope && var < scope->escape_base) {
    blocked = var;
    return UnifyResult::Status::Escape;
  }
  if ((nodes_[var].flags & kProxy) && !authoritative_) {
    blocked = var;
    return UnifyResult::Status::Remote;
  }
  if (scope && scope->trail && var < scope->trail_limit) scope->trail->push_back(var);
  nodes_[var].a = term;
  wake_all(var, woken);
  propagate_need(var, term, woken);
  if ((nodes_[var].flags & kWatched) && observer_) observer_(var);
  return UnifyResult::Status::Success;
}

UnifyResult Store::unify(Ref a, Ref b, const BindScope* scope) {
  UnifyResult result;
  std::vector<std::pair<Ref, Ref>> work;
  std::unordered_set<std::uint64_t> visited;
  work.emplace_back(a, b);
  while (!work.empty()) {
    auto [x, y] = work.back();
    work.pop_back();
    x = deref(x);
    y = deref(y);
    if (x == y) continue;
    const Node& nx = nodes_[x];
    const Node& ny = nodes_[y];
    Ref var = kNoRef, term = kNoRef;
    if (nx.tag == Tag::Var && ny.tag == Tag::Var) {
      // Greater variable is bound to the lesser one.
      if (var_id(x) < var_id(y)) {
        var = y;
        term = x;
      } else {
        var = x;
        term = y;
      }
    } else if (nx.tag == Tag::Var) {
      var = x;
      term = y;
    } else if (ny.tag == Tag::Var) {
      var = y;
      term = x;
    }
    if (var != kNoRef) {
      Ref blocked = kNoRef;
      auto st = bind(var, term, scope, result.woken, blocked);
      if (st != UnifyResult::Status::Success) {
        result.status = st;
        result.var = blocked;
        result.term = term;
        return result;
      }
      continue;
    }
    if (nx.tag != ny.tag) {
      result.status = UnifyResult::Status::Failure;
      return result;
    }
    switch (nx.tag) {
      case Tag::Atom:
        if (nx.a != ny.a) result.status = UnifyResult::Status::Failure;
        break;
      case Tag::Int:
        if (nx.c != ny.c) result.status = UnifyResult::Status::Failure;
        break;
      case Tag::Closure:
        result.status = UnifyResult::Status::Failure;  // distinct references
        break;
      case Tag::Compound: {
        if (nx.a != ny.a || nx.b != ny.b) {
          result.status = UnifyResult::Status::Failure;
          break;
        }
        if (!visited.insert(pair_key(x, y)).second) break;
        std::uint64_t ox = nx.c, oy = ny.c;
        for (std::uint32_t i = nx.b; i-- > 0;) work.emplace_back(args_[ox + i], args_[oy + i]);
        break;
      }
      case Tag::Var:
        break;
    }
    if (result.status != UnifyResult::Status::Success) return result;
  }
  return result;
}

EqResult Store::equals(Ref a, Ref b) const {
  EqResult result;
  std::vector<std::pair<Ref, Ref>> work;
  std::unordered_set<std::uint64_t> visited;
  std::unordered_set<Ref> frontier;
  work.emplace_back(a, b);
  while (!work.empty()) {
    auto [x, y] = work.back();
    work.pop_back();
    x = deref(x);
    y = deref(y);
    if (x == y) continue;
    const Node& nx = nodes_[x];
    const Node& ny = nodes_[y];
    if (nx.tag == Tag::Var || ny.tag == Tag::Var) {
      if (nx.tag == Tag::Var) frontier.insert(x);
      if (ny.tag == Tag::Var) frontier.insert(y);
      continue;
    }
    bool clash = nx.tag != ny.tag;
    if (!clash) {
      switch (nx.tag) {
        case Tag::Atom:
          clash = nx.a != ny.a;
          break;
        case Tag::Int:
          clash = nx.c != ny.c;
          break;
        case Tag::Closure:
          clash = true;
          break;
        case Tag::Compound:
          if (nx.a != ny.a || nx.b != ny.b) {
            clash = true;
          } else if (visited.insert(pair_key(x, y)).second) {
            for (std::uint32_t i = nx.b; i-- > 0;) work.emplace_back(args_[nx.c + i], args_[ny.c + i]);
          }
          break;
        case Tag::Var:
          break;
      }
    }
    if (clash) {
      result.kind = EqResult::Kind::False;
      return result;
    }
  }
  if (!frontier.empty()) {
    result.kind = EqResult::Kind::Undetermined;
    result.suspend_on.assign(frontier.begin(), frontier.end());
    std::sort(result.suspend_on.begin(), result.suspend_on.end());
  }
  return result;
}

std::vector<ThreadId> Store::bind_and_wake(Ref var, Ref term) {
  if (nodes_[var].tag != Tag::Var || nodes_[var].a != var)
    throw StoreError("bind_and_wake: variable " + to_string(var_id(var)) + " is already bound");
  std::vector<ThreadId> woken;
  Ref blocked = kNoRef;
  if (bind(var, term, nullptr, woken, blocked) != UnifyResult::Status::Success)
    throw StoreError("bind_and_wake: cannot bind proxy " + to_string(var_id(var)) + " locally");
  return woken;
}

std::vector<ThreadId> Store::bind_authoritative(Ref var, Ref term) {
  authoritative_ = true;
  std::vector<ThreadId> woken;
  Ref blocked = kNoRef;
  bind(var, term, nullptr, woken, blocked);
  authoritative_ = false;
  return woken;
}

void Store::undo_trail(std::vector<Ref>& trail, std::size_t mark) {
  while (trail.size() > mark) {
    Ref v = trail.back();
    trail.pop_back();
    nodes_[v].a = v;
  }
}

// --- suspension registry ---------------------------------------------------

std::vector<ThreadId> Store::add_waiter(Ref var, ThreadId tid) {
  auto& list = waiters_[var];
  if (std::find(list.begin(), list.end(), tid) == list.end()) list.push_back(tid);
  return mark_needed(var);
}

void Store::remove_waiter(Ref var, ThreadId tid) {
  auto it = waiters_.find(var);
  if (it == waiters_.end()) return;
  std::erase(it->second, tid);
  if (it->second.empty()) waiters_.erase(it);
}

void Store::add_need_waiter(Ref var, ThreadId tid) {
  auto& list = need_waiters_[var];
  if (std::find(list.begin(), list.end(), tid) == list.end()) list.push_back(tid);
}

void Store::remove_need_waiter(Ref var, ThreadId tid) {
  auto it = need_waiters_.find(var);
  if (it == need_waiters_.end()) return;
  std::erase(it->second, tid);
  if (it->second.empty()) need_waiters_.erase(it);
}

std::vector<ThreadId> Store::mark_needed(Ref var) {
  std::vector<ThreadId> woken;
  nodes_[var].flags |= kNeeded;
  if (auto it = need_waiters_.find(var); it != need_waiters_.end()) {
    woken = std::move(it->second);
    need_waiters_.erase(it);
  }
  return woken;
}

std::span<const ThreadId> Store::waiters(Ref var) const {
  auto it = waiters_.find(var);
  if (it == waiters_.end()) return {};
  return it->second;
}

std::span<const ThreadId> Store::need_waiters(Ref var) const {
  auto it = need_waiters_.find(var);
  if (it == need_waiters_.end()) return {};
  return it->second;
}

// --- cross-store utilities -------------------------------------------------

bool bisimilar(const Store& sa, Ref a, const Store& sb, Ref b) {
  std::vector<std::pair<Ref, Ref>> work{{a, b}};
  std::unordered_set<std::uint64_t> visited;
  while (!work.empty()) {
    auto [x, y] = work.back();
    work.pop_back();
    x = sa.deref(x);
    y = sb.deref(y);
    Tag tx = sa.tag(x), ty = sb.tag(y);
    if (tx != ty) return false;
    switch (tx) {
      case Tag::Var:
        if (sa.var_id(x) != sb.var_id(y)) return false;
        break;
      case Tag::Atom:
        if (sa.atom(x) != sb.atom(y)) return false;
        break;
      case Tag::Int:
        if (sa.int_value(x) != sb.int_value(y)) return false;
        break;
      case Tag::Closure:
        if (&sa != &sb || x != y) return false;
        break;
      case Tag::Compound: {
        if (sa.label(x) != sb.label(y) || sa.arity(x) != sb.arity(y)) return false;
        std::uint64_t key = (static_cast<std::uint64_t>(x) << 32) | y;
        if (!visited.insert(key).second) break;
        for (std::uint32_t i = 0; i < sa.arity(x); ++i) work.emplace_back(sa.arg(x, i), sb.arg(y, i));
        break;
      }
    }
  }
  return true;
}

Ref copy_graph(const Store& src, Ref root, Store& dst, const std::function<Ref(Ref)>& map_var) {
  std::unordered_map<Ref, Ref> copied;
  // Pending compound argument fills: (dst compound, index, src term).
  std::vector<std::tuple<Ref, std::uint32_t, Ref>> fills;

  auto visit = [&](Ref s) -> Ref {
    s = src.deref(s);
    if (auto it = copied.find(s); it != copied.end()) return it->second;
    Ref out = kNoRef;
    switch (src.tag(s)) {
      case Tag::Var:
        out = map_var(s);
        break;
      case Tag::Atom:
        out = dst.make_atom(src.atom(s));
        break;
      case Tag::Int:
        out = dst.make_int(src.int_value(s));
        break;
      case Tag::Closure:
        if (&src == &dst) {
          out = s;
        } else {
          throw StoreError("procedure values cannot be copied between stores");
        }
        break;
      case Tag::Compound: {
        std::uint32_t n = src.arity(s);
        out = dst.make_compound_uninit(src.label(s), n);
        for (std::uint32_t i = 0; i < n; ++i) fills.emplace_back(out, i, src.arg(s, i));
        break;
      }
    }
    copied.emplace(s, out);
    return out;
  };

  Ref result = visit(root);
  while (!fills.empty()) {
    auto [target, i, s] = fills.back();
    fills.pop_back();
    dst.set_arg(target, i, visit(s));
  }
  return result;
}

}  // namespace ozk
