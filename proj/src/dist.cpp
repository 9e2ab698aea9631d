#include "ozk/dist.hpp"

#include <algorithm>
#include <sstream>

#include "ozk/syntax.hpp"

namespace ozk::dist {

// --- snapshots -----------------------------------------------------------------

std::vector<VarId> Snapshot::frontier() const {
  std::vector<VarId> out;
  for (auto& n : nodes)
    if (n.kind == Node::Kind::Var) out.push_back(n.var);
  return out;
}

Snapshot encode(const Store& store, Ref root, const std::function<void(Ref)>& on_var) {
  Snapshot snap;
  std::unordered_map<Ref, std::uint32_t> index;
  std::vector<Ref> todo;
  auto visit = [&](Ref r) -> std::uint32_t {
    r = store.deref(r);
    if (auto it = index.find(r); it != index.end()) return it->second;
    auto i = static_cast<std::uint32_t>(snap.nodes.size());
    index.emplace(r, i);
    snap.nodes.emplace_back();
    todo.push_back(r);
    return i;
  };
  visit(root);
  while (!todo.empty()) {
    Ref r = todo.back();
    todo.pop_back();
    std::uint32_t i = index.at(r);
    Snapshot::Node n;
    switch (store.tag(r)) {
      case Tag::Var:
        if (on_var) on_var(r);
        n.kind = Snapshot::Node::Kind::Var;
        n.var = store.var_id(r);
        break;
      case Tag::Atom:
        n.kind = Snapshot::Node::Kind::Atom;
        n.name = atom_name(store.atom(r));
        break;
      case Tag::Int:
        n.kind = Snapshot::Node::Kind::Int;
        n.value = store.int_value(r);
        break;
      case Tag::Compound:
        n.kind = Snapshot::Node::Kind::Compound;
        n.name = atom_name(store.label(r));
        for (Ref a : store.args(r)) n.args.push_back(visit(a));
        break;
      case Tag::Closure:
        throw DistError("procedure values cannot be sent between nodes");
    }
    snap.nodes[i] = std::move(n);
  }
  return snap;
}

Ref decode(Store& store, const Snapshot& snap, const std::function<Ref(const VarId&)>& var_ref) {
  std::vector<Ref> refs(snap.nodes.size(), kNoRef);
  for (std::size_t i = 0; i < snap.nodes.size(); ++i) {
    const auto& n = snap.nodes[i];
    switch (n.kind) {
      case Snapshot::Node::Kind::Var:
        refs[i] = var_ref(n.var);
        break;
      case Snapshot::Node::Kind::Atom:
        refs[i] = store.make_atom(n.name);
        break;
      case Snapshot::Node::Kind::Int:
        refs[i] = store.make_int(n.value);
        break;
      case Snapshot::Node::Kind::Compound:
        refs[i] = store.make_compound_uninit(intern(n.name), static_cast<std::uint32_t>(n.args.size()));
        break;
    }
  }
  for (std::size_t i = 0; i < snap.nodes.size(); ++i) {
    const auto& n = snap.nodes[i];
    for (std::uint32_t k = 0; k < n.args.size(); ++k) store.set_arg(refs[i], k, refs[n.args[k]]);
  }
  return refs.empty() ? kNoRef : refs[0];
}

// --- messages, placement, report -----------------------------------------------

const char* type_name(Message::Type t) {
  switch (t) {
    case Message::Type::Register:
      return "Register";
    case Message::Type::BindRequest:
      return "BindRequest";
    case Message::Type::BindNotify:
      return "BindNotify";
    case Message::Type::UnifyVarVar:
      return "UnifyVarVar";
  }
  return "?";
}

std::string trace_line(const Message& m) {
  return std::to_string(m.src) + " " + std::to_string(m.dst) + " " + type_name(m.type) + " " + to_string(m.var);
}

NodeId Placement::node_of(int thread_index) const {
  auto it = threads.find(thread_index);
  return it == threads.end() ? 0 : it->second;
}

NodeId Placement::max_node() const {
  NodeId m = main;
  for (auto& [t, n] : threads) m = std::max(m, n);
  return m;
}

Placement parse_placement(const std::string& text) {
  Placement p;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    auto eq = item.find('=');
    if (eq == std::string::npos) throw DistError("placement item '" + item + "' is not thread=node");
    std::string key = item.substr(0, eq), val = item.substr(eq + 1);
    try {
      std::size_t used = 0;
      unsigned long node = std::stoul(val, &used);
      if (used != val.size() || node > 1000) throw std::invalid_argument(val);
      if (key == "main") {
        p.main = static_cast<NodeId>(node);
      } else {
        int t = std::stoi(key, &used);
        if (used != key.size() || t < 1) throw std::invalid_argument(key);
        p.threads[t] = static_cast<NodeId>(node);
      }
    } catch (const std::logic_error&) {
      throw DistError("placement item '" + item + "' is not thread=node");
    }
  }
  return p;
}

std::vector<std::string> SimReport::all_outputs() const {
  std::vector<std::string> out;
  for (auto& lines : outputs) out.insert(out.end(), lines.begin(), lines.end());
  return out;
}

std::string SimReport::summary() const {
  std::ostringstream os;
  os << "outcome " << outcome_name(outcome) << "\n";
  for (std::size_t n = 0; n < node_outcomes.size(); ++n)
    os << "node " << n << ": " << outcome_name(node_outcomes[n]) << ", " << outputs[n].size() << " output lines\n";
  os << "messages";
  for (auto& [type, count] : messages) os << " " << type << "=" << count;
  os << " delivered=" << delivered << "\n";
  os << "steps " << steps << " clock " << clock << "\n";
  if (!failure.empty()) os << "failure: " << failure << "\n";
  if (!deadlock.empty()) os << deadlock;
  return os.str();
}

// --- simulation ----------------------------------------------------------------

Simulation::Simulation(SimOptions options) : opts_(std::move(options)), net_rng_(opts_.net_seed) {}

Ref Simulation::global(NodeId n, const std::string& name) const { return nodes_.at(n).rt->global(name); }

VarId Simulation::export_var(NodeId n, Ref var) {
  NodeState& ns = nodes_.at(n);
  Store& s = ns.rt->store();
  VarId id = s.var_id(var);
  if (s.is_proxy(var) || id.origin_node != n) return id;
  if (ns.vars.emplace(id, var).second) s.watch(var);
  return id;
}

Ref Simulation::import(NodeId n, const VarId& id) {
  NodeState& ns = nodes_.at(n);
  if (auto it = ns.vars.find(id); it != ns.vars.end()) return it->second;
  if (id.origin_node == n) throw DistError("node " + std::to_string(n) + " has no exported variable " + to_string(id));
  if (id.origin_node >= nodes_.size()) throw DistError("variable " + to_string(id) + " has no owner node");
  Ref proxy = ns.rt->store().new_proxy(id);
  ns.vars.emplace(id, proxy);
  Message m;
  m.type = Message::Type::Register;
  m.src = n;
  m.dst = id.origin_node;
  m.var = id;
  send(std::move(m));
  return proxy;
}

std::map<VarId, std::vector<std::pair<NodeId, Ref>>> Simulation::replicas() const {
  std::map<VarId, std::vector<std::pair<NodeId, Ref>>> out;
  for (auto& ns : nodes_)
    for (auto& [id, ref] : ns.vars) out[id].emplace_back(ns.id, ref);
  return out;
}

Snapshot Simulation::snapshot(NodeId n, Ref term) {
  Store& s = nodes_.at(n).rt->store();
  return encode(s, term, [&](Ref v) { export_var(n, v); });
}

Ref Simulation::materialize(NodeId n, const Snapshot& snap) {
  return decode(nodes_.at(n).rt->store(), snap, [&](const VarId& id) { return import(n, id); });
}

void Simulation::send(Message m) {
  ++report_.messages[type_name(m.type)];
  links_[{m.src, m.dst}].push_back(std::move(m));
  ++in_flight_;
}

void Simulation::mark_failed(const std::string& why) {
  if (failed_) return;
  failed_ = true;
  report_.failure = why;
}

void Simulation::on_remote_bind(NodeId n, Ref var, Ref term) {
  Store& s = nodes_.at(n).rt->store();
  try {
    Message m;
    m.src = n;
    m.var = s.var_id(var);
    m.dst = m.var.origin_node;
    Ref t = s.deref(term);
    if (s.is_unbound(t)) {
      m.type = Message::Type::UnifyVarVar;
      m.other = export_var(n, t);
    } else {
      m.type = Message::Type::BindRequest;
      m.term = snapshot(n, t);
    }
    send(std::move(m));
  } catch (const DistError& e) {
    mark_failed("node " + std::to_string(n) + ": " + e.what());
  }
}

void Simulation::on_bind(NodeId n, Ref var) {
  NodeState& ns = nodes_.at(n);
  Store& s = ns.rt->store();
  VarId id = s.var_id(var);
  auto it = ns.subscribers.find(id);
  if (it == ns.subscribers.end() || it->second.empty()) return;
  try {
    Snapshot snap = snapshot(n, s.deref(var));
    for (NodeId dst : it->second) {
      Message m;
      m.type = Message::Type::BindNotify;
      m.src = n;
      m.dst = dst;
      m.var = id;
      m.term = snap;
      send(std::move(m));
    }
  } catch (const DistError& e) {
    mark_failed("node " + std::to_string(n) + ": " + e.what());
  }
}

void Simulation::deliver(Message m) {
  report_.trace.push_back(trace_line(m));
  ++report_.delivered;
  NodeState& ns = nodes_.at(m.dst);
  Runtime& rt = *ns.rt;
  Store& s = rt.store();
  try {
    switch (m.type) {
      case Message::Type::Register: {
        Ref var = import(m.dst, m.var);
        if (!ns.subscribers[m.var].insert(m.src).second) break;
        if (!s.is_unbound(s.deref(var))) {
          Message r;
          r.type = Message::Type::BindNotify;
          r.src = m.dst;
          r.dst = m.src;
          r.var = m.var;
          r.term = snapshot(m.dst, s.deref(var));
          send(std::move(r));
        }
        break;
      }
      case Message::Type::BindRequest: {
        Ref var = import(m.dst, m.var);
        Ref term = materialize(m.dst, m.term);
        rt.spawn_unify(var, term);
        break;
      }
      case Message::Type::UnifyVarVar: {
        Ref var = import(m.dst, m.var);
        Ref other = import(m.dst, m.other);
        rt.spawn_unify(var, other);
        break;
      }
      case Message::Type::BindNotify: {
        Ref var = import(m.dst, m.var);
        Ref term = materialize(m.dst, m.term);
        if (s.deref(var) == var && s.is_unbound(var))
          rt.wake(s.bind_authoritative(var, term));
        else
          rt.spawn_unify(var, term);  // a second notification must agree
        break;
      }
    }
  } catch (const DistError& e) {
    mark_failed("node " + std::to_string(m.dst) + ": " + e.what());
  }
}

bool Simulation::deliver_some() {
  if (in_flight_ == 0) return false;
  if (opts_.delivery == Delivery::FifoPerLink) {
    // one message per link per round, links in a fixed order
    std::vector<Message> batch;
    for (auto& [link, q] : links_) {
      if (q.empty()) continue;
      batch.push_back(std::move(q.front()));
      q.pop_front();
      --in_flight_;
    }
    for (auto& m : batch) deliver(std::move(m));
    return true;
  }
  std::uint64_t count = 1 + net_rng_() % in_flight_;
  for (std::uint64_t k = 0; k < count && in_flight_ > 0; ++k) {
    std::uint64_t pick = net_rng_() % in_flight_;
    for (auto& [link, q] : links_) {
      if (pick >= q.size()) {
        pick -= q.size();
        continue;
      }
      Message m = std::move(q[pick]);
      q.erase(q.begin() + static_cast<std::ptrdiff_t>(pick));
      --in_flight_;
      deliver(std::move(m));
      break;
    }
  }
  return true;
}

void Simulation::load(std::string_view source, const Placement& placement) {
  if (!nodes_.empty()) throw DistError("program already loaded");
  std::size_t count = std::max<std::size_t>(opts_.nodes, placement.max_node() + 1);
  auto phrases = parse_program(source);
  for (std::size_t n = 0; n < count; ++n) {
    RuntimeOptions ro = opts_.runtime;
    ro.node = static_cast<NodeId>(n);
    ro.seed = opts_.runtime.seed + n;
    NodeState ns;
    ns.id = static_cast<NodeId>(n);
    ns.rt = std::make_unique<Runtime>(ro);
    nodes_.push_back(std::move(ns));
  }
  for (std::size_t n = 0; n < count; ++n) {
    auto id = static_cast<NodeId>(n);
    Runtime& rt = *nodes_[n].rt;
    rt.store().set_bind_observer([this, id](Ref v) { on_bind(id, v); });
    rt.set_remote_bind_handler([this, id](Ref v, Ref t) { on_remote_bind(id, v, t); });
    CompiledProgram prog = compile_program(phrases, rt.env(), [&](const std::string& name, bool definition) -> Ref {
      if (definition) return rt.store().new_var();
      if (n == 0) {
        Ref v = rt.store().new_var();
        globals_[name] = export_var(0, v);
        return v;
      }
      auto it = globals_.find(name);
      if (it == globals_.end()) throw DistError("global " + name + " is unknown on node 0");
      return import(id, it->second);
    });
    rt.spawn_program(prog, [&](const TopItem& item) {
      switch (item.kind) {
        case TopItem::Kind::Definition:
          return true;
        case TopItem::Kind::Thread:
          return placement.node_of(item.thread_index) == id;
        case TopItem::Kind::Main:
          return placement.main == id;
      }
      return false;
    });
  }
}

SimReport Simulation::run() {
  std::uint64_t steps = 0;
  bool step_limit = false;
  while (true) {
    bool ran = false;
    for (auto& ns : nodes_) {
      if (ns.rt->failed()) mark_failed("node " + std::to_string(ns.id) + ": " + ns.rt->failure());
      if (ns.rt->has_runnable()) {
        ns.rt->run_slice();
        ran = true;
      }
    }
    if (failed_) break;
    steps = 0;
    for (auto& ns : nodes_) steps += ns.rt->steps();
    if (steps > opts_.max_steps) {
      step_limit = true;
      break;
    }
    bool moved = deliver_some();
    if (ran || moved) continue;
    std::optional<std::int64_t> next;
    for (auto& ns : nodes_)
      if (auto t = ns.rt->next_timer(); t && (!next || *t < *next)) next = t;
    if (!next) break;
    for (auto& ns : nodes_) ns.rt->advance_clock(*next);
  }
  for (auto& ns : nodes_)
    if (ns.rt->failed()) mark_failed("node " + std::to_string(ns.id) + ": " + ns.rt->failure());

  report_.steps = steps;
  report_.node_outcomes.clear();
  report_.outputs.clear();
  report_.deadlock.clear();
  bool deadlock = false;
  for (auto& ns : nodes_) {
    Outcome o = ns.rt->failed() ? Outcome::Failed : step_limit ? Outcome::StepLimit : ns.rt->settle_outcome();
    report_.node_outcomes.push_back(o);
    report_.outputs.push_back(ns.rt->output());
    report_.clock = std::max(report_.clock, ns.rt->clock());
    if (o == Outcome::Deadlock) {
      deadlock = true;
      std::istringstream lines(ns.rt->deadlock_report());
      for (std::string line; std::getline(lines, line);)
        report_.deadlock += "node " + std::to_string(ns.id) + ": " + line + "\n";
    }
  }
  if (failed_)
    report_.outcome = Outcome::Failed;
  else if (step_limit)
    report_.outcome = Outcome::StepLimit;
  else if (deadlock)
    report_.outcome = Outcome::Deadlock;
  else
    report_.outcome = Outcome::AllDone;
  return report_;
}

}  // namespace ozk::dist
