#pragma once

// Simulated network of runtimes sharing dataflow variables. Every variable
// has an owner node (its origin). Other nodes hold proxies; binding a proxy
// sends a request to the owner, which binds and notifies registered nodes.

#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <random>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "ozk/runtime.hpp"

namespace ozk::dist {

class DistError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Self-contained copy of a term graph. Node 0 is the root; compound
/// arguments are indices into `nodes`, so cycles survive. Unbound
/// variables appear only by global id.
struct Snapshot {
  struct Node {
    enum class Kind : std::uint8_t { Var, Atom, Int, Compound };
    Kind kind = Kind::Atom;
    VarId var;
    std::string name;  // atom or label
    std::int64_t value = 0;
    std::vector<std::uint32_t> args;
  };
  std::vector<Node> nodes;

  std::vector<VarId> frontier() const;
};

/// `on_var` is called for each unbound variable met, before it is recorded
/// by id. Throws DistError for procedure values.
Snapshot encode(const Store& store, Ref root, const std::function<void(Ref)>& on_var = {});
Ref decode(Store& store, const Snapshot& snap, const std::function<Ref(const VarId&)>& var_ref);

struct Message {
  enum class Type : std::uint8_t { Register, BindRequest, BindNotify, UnifyVarVar };
  Type type = Type::Register;
  NodeId src = 0;
  NodeId dst = 0;
  VarId var;        // variable to bind, register or notify; the greater one for UnifyVarVar
  VarId other;      // UnifyVarVar: the lesser variable
  Snapshot term;    // BindRequest, BindNotify
};
const char* type_name(Message::Type t);
/// `src dst type var`
std::string trace_line(const Message& m);

enum class Delivery : std::uint8_t { FifoPerLink, SeededShuffle };

/// Which node runs which top-level thread. Threads are numbered from 1 in
/// source order; `main` is everything that is neither a definition nor a
/// top-level thread.
struct Placement {
  std::map<int, NodeId> threads;
  NodeId main = 0;
  NodeId node_of(int thread_index) const;
  NodeId max_node() const;
};
/// "1=0,2=1,main=0". Throws DistError.
Placement parse_placement(const std::string& text);

struct SimOptions {
  std::size_t nodes = 0;  // at least max_node()+1 of the placement
  Delivery delivery = Delivery::FifoPerLink;
  std::uint64_t net_seed = 0;
  RuntimeOptions runtime;  // node and seed are set per node
  std::uint64_t max_steps = 10'000'000;
};

struct SimReport {
  Outcome outcome = Outcome::AllDone;
  std::vector<Outcome> node_outcomes;
  std::vector<std::vector<std::string>> outputs;  // per node
  std::map<std::string, std::uint64_t> messages;  // by type
  std::uint64_t delivered = 0;
  std::uint64_t steps = 0;
  std::int64_t clock = 0;
  std::vector<std::string> trace;
  std::string failure;
  std::string deadlock;

  /// Output lines of all nodes, node by node.
  std::vector<std::string> all_outputs() const;
  std::string summary() const;
};

class Simulation {
 public:
  explicit Simulation(SimOptions options);

  /// Compiles the program on every node. Globals are owned by node 0 and
  /// proxied elsewhere; definitions are replicated.
  void load(std::string_view source, const Placement& placement);
  SimReport run();

  std::size_t node_count() const { return nodes_.size(); }
  Runtime& node(NodeId n) { return *nodes_.at(n).rt; }
  /// Local reference of a global on a node, kNoRef if unknown.
  Ref global(NodeId n, const std::string& name) const;
  /// Local reference for a global variable id on a node, creating and
  /// registering a proxy when needed.
  Ref import(NodeId n, const VarId& id);
  /// Makes a local variable reachable from other nodes.
  VarId export_var(NodeId n, Ref var);
  bool network_empty() const { return in_flight_ == 0; }
  /// Local references of every shared variable, by id: (node, ref) pairs.
  std::map<VarId, std::vector<std::pair<NodeId, Ref>>> replicas() const;
  const SimReport& report() const { return report_; }

 private:
  struct NodeState {
    NodeId id = 0;
    std::unique_ptr<Runtime> rt;
    std::unordered_map<VarId, Ref> vars;                 // owned exported vars and proxies
    std::unordered_map<VarId, std::set<NodeId>> subscribers;  // owned vars only
  };

  void send(Message m);
  void deliver(Message m);
  bool deliver_some();
  void on_remote_bind(NodeId n, Ref var, Ref term);
  void on_bind(NodeId n, Ref var);
  Snapshot snapshot(NodeId n, Ref term);
  Ref materialize(NodeId n, const Snapshot& s);
  void mark_failed(const std::string& why);

  SimOptions opts_;
  std::vector<NodeState> nodes_;
  std::map<std::pair<NodeId, NodeId>, std::deque<Message>> links_;
  std::size_t in_flight_ = 0;
  std::mt19937_64 net_rng_;
  std::unordered_map<std::string, VarId> globals_;
  SimReport report_;
  bool failed_ = false;
};

}  // namespace ozk::dist
