#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "ozk/term.hpp"

namespace ozk {

struct ProcCode;

/// Raised for misuse of the store API (binding a bound variable, integer
/// overflow and similar). Unification failure is not an error.
class StoreError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A procedure value. Either compiled code with captured variables or a
/// native builtin identified by index.
struct ClosureData {
  const ProcCode* code = nullptr;
  std::vector<Ref> captures;
  int builtin = -1;
  std::uint32_t arity = 0;
};

/// Where a binding happens. Inside a search engine or a deep guard, older
/// variables are trailed so they can be restored, and variables created
/// before `escape_base` must not be bound at all.
struct BindScope {
  std::vector<Ref>* trail = nullptr;
  Ref trail_limit = 0;
  Ref escape_base = 0;
};

struct UnifyResult {
  enum class Status : std::uint8_t {
    Success,
    Failure,
    Escape,  // would bind `var`, which lives outside the current scope
    Remote,  // would bind `var`, a proxy owned by another node
  };
  Status status = Status::Success;
  std::vector<ThreadId> woken;
  Ref var = kNoRef;
  Ref term = kNoRef;

  bool ok() const { return status == Status::Success; }
};

struct EqResult {
  enum class Kind : std::uint8_t { True, False, Undetermined };
  Kind kind = Kind::True;
  std::vector<Ref> suspend_on;
};

/// Union-find binding environment over a node arena. Terms are rational
/// trees: cycles may pass through compound arguments. The store also keeps
/// the suspension registry (threads waiting for a variable's value), the
/// by-need registry (threads in WaitNeeded), and need flags.
class Store {
 public:
  explicit Store(NodeId origin_node = 0);

  Store(const Store&) = delete;
  Store& operator=(const Store&) = delete;

  NodeId origin() const { return origin_; }
  std::size_t size() const { return nodes_.size(); }
  std::uint64_t vars_created() const { return next_seq_ - 1; }

  // --- construction -------------------------------------------------------
  Ref new_var();
  /// A local stand-in for a variable owned by another node.
  Ref new_proxy(VarId id);
  Ref make_atom(AtomId atom);
  Ref make_atom(std::string_view name) { return make_atom(intern(name)); }
  Ref make_int(std::int64_t value);
  Ref make_compound(AtomId label, std::span<const Ref> args);
  /// Compound with unset arguments; fill with set_arg before use.
  Ref make_compound_uninit(AtomId label, std::uint32_t arity);
  void set_arg(Ref compound, std::uint32_t i, Ref value);
  Ref make_closure(ClosureData data);
  Ref nil() { return make_atom(atoms::nil()); }
  Ref cons(Ref head, Ref tail);
  Ref list(std::span<const Ref> items, Ref tail = kNoRef);

  // --- inspection ---------------------------------------------------------
  Ref deref(Ref r) const;
  Tag tag(Ref r) const { return nodes_[r].tag; }
  bool is_var(Ref r) const { return nodes_[r].tag == Tag::Var; }
  bool is_unbound(Ref r) const;
  bool is_proxy(Ref r) const { return (nodes_[r].flags & kProxy) != 0; }
  VarId var_id(Ref var) const;
  AtomId atom(Ref r) const { return nodes_[r].a; }
  std::int64_t int_value(Ref r) const { return static_cast<std::int64_t>(nodes_[r].c); }
  AtomId label(Ref r) const { return nodes_[r].a; }
  std::uint32_t arity(Ref r) const { return nodes_[r].b; }
  Ref arg(Ref r, std::uint32_t i) const { return args_[nodes_[r].c + i]; }
  std::span<const Ref> args(Ref r) const;
  const ClosureData& closure(Ref r) const { return closures_[nodes_[r].a]; }
  bool is_atom(Ref r, AtomId a) const { return tag(r) == Tag::Atom && atom(r) == a; }
  /// Follows cons cells; returns false for partial, improper or cyclic lists.
  bool as_list(Ref r, std::vector<Ref>& out) const;

  // --- unification --------------------------------------------------------
  UnifyResult unify(Ref a, Ref b, const BindScope* scope = nullptr);
  EqResult equals(Ref a, Ref b) const;
  /// Binds an unbound variable and returns the threads that were waiting on
  /// it. Throws StoreError if `var` is already bound.
  std::vector<ThreadId> bind_and_wake(Ref var, Ref term);
  /// Binds a proxy on behalf of its owner (applying a remote notification).
  std::vector<ThreadId> bind_authoritative(Ref var, Ref term);
  void undo_trail(std::vector<Ref>& trail, std::size_t mark);

  // --- suspension registry ------------------------------------------------
  /// Registers `tid` as waiting for the value of `var`, which marks `var`
  /// needed. Returns by-need waiters that become runnable as a result.
  std::vector<ThreadId> add_waiter(Ref var, ThreadId tid);
  void remove_waiter(Ref var, ThreadId tid);
  void add_need_waiter(Ref var, ThreadId tid);
  void remove_need_waiter(Ref var, ThreadId tid);
  std::vector<ThreadId> mark_needed(Ref var);
  bool needed(Ref var) const { return (nodes_[var].flags & kNeeded) != 0; }
  std::span<const ThreadId> waiters(Ref var) const;
  std::span<const ThreadId> need_waiters(Ref var) const;

  // --- distribution hooks -------------------------------------------------
  /// Calls `observer` whenever a watched variable gets bound.
  void watch(Ref var) { nodes_[var].flags |= kWatched; }
  void set_bind_observer(std::function<void(Ref)> observer) { observer_ = std::move(observer); }

 private:
  static constexpr std::uint8_t kNeeded = 1;
  static constexpr std::uint8_t kProxy = 2;
  static constexpr std::uint8_t kWatched = 4;

  struct Node {
    Tag tag;
    std::uint8_t flags;
    std::uint32_t a;  // var: binding (self when unbound); atom; label; closure index
    std::uint32_t b;  // var: origin node; compound: arity
    std::uint64_t c;  // var: seq; int value; compound: args offset
  };

  Ref push(Node n);
  UnifyResult::Status bind(Ref var, Ref term, const BindScope* scope, std::vector<ThreadId>& woken,
                           Ref& blocked);
  void wake_all(Ref var, std::vector<ThreadId>& woken);
  void propagate_need(Ref from, Ref to, std::vector<ThreadId>& woken);

  NodeId origin_;
  std::uint64_t next_seq_ = 1;
  std::vector<Node> nodes_;
  std::vector<Ref> args_;
  std::deque<ClosureData> closures_;
  std::unordered_map<AtomId, Ref> atom_cache_;
  std::vector<Ref> small_ints_;
  std::unordered_map<Ref, std::vector<ThreadId>> waiters_;
  std::unordered_map<Ref, std::vector<ThreadId>> need_waiters_;
  std::function<void(Ref)> observer_;
  bool authoritative_ = false;
};

/// Bisimulation check across two stores. Unbound variables match only when
/// they carry the same VarId.
bool bisimilar(const Store& sa, Ref a, const Store& sb, Ref b);

/// Cycle-preserving copy of the term graph at `root` from `src` into `dst`.
/// `map_var` decides what an unbound source variable becomes in `dst`.
Ref copy_graph(const Store& src, Ref root, Store& dst, const std::function<Ref(Ref)>& map_var);

}  // namespace ozk
