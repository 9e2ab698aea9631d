#include "ozk/runtime.hpp"

#include <algorithm>
#include <chrono>
#include <limits>
#include <thread>

#include "ozk/render.hpp"

namespace ozk {

const char* outcome_name(Outcome o) {
  switch (o) {
    case Outcome::AllDone:
      return "done";
    case Outcome::Deadlock:
      return "deadlock";
    case Outcome::Failed:
      return "failed";
    case Outcome::StepLimit:
      return "step limit";
  }
  return "?";
}

Runtime::Runtime(RuntimeOptions options) : opts_(options), store_(options.node), rng_(options.seed) {
  auto table = builtin_table();
  for (std::size_t i = 0; i < table.size(); ++i) {
    ClosureData cd;
    cd.builtin = static_cast<int>(i);
    cd.arity = table[i].arity;
    Ref ref = store_.make_closure(std::move(cd));
    env_.names[table[i].name] = GlobalEnv::Entry{ref, static_cast<int>(table[i].arity), true};
    env_.internal[table[i].name] = ref;
  }
  if (opts_.prelude) {
    load(prelude_source());
    bool saved_trace = opts_.trace;
    opts_.trace = false;
    Outcome o = run();
    opts_.trace = saved_trace;
    if (o != Outcome::AllDone) throw RuntimeError("prelude did not load: " + failure_);
    for (auto& [name, entry] : env_.names) entry.shadowable = true;
    trace_.clear();
    steps_ = 0;
  }
}

// --- loading -------------------------------------------------------------------

ThreadId Runtime::load(std::string_view source) {
  auto phrases = parse_program(source);
  CompiledProgram prog = compile_program(phrases, env_, [this](const std::string&, bool) { return store_.new_var(); });
  return spawn_program(prog);
}

ThreadId Runtime::spawn_program(const CompiledProgram& program, const std::function<bool(const TopItem&)>& keep) {
  programs_.push_back(program);
  auto frame = std::make_shared<Frame>();
  frame->code = program.top.get();
  frame->slots.assign(program.top->frame_size, kNoRef);
  Entry e;
  e.frame = frame;
  if (!keep) {
    e.stmt = program.top->body.get();
  } else {
    auto seq = std::make_shared<SeqStmt>();
    for (auto& item : program.items)
      if (keep(item)) seq->body.push_back(item.stmt);
    if (seq->body.empty()) seq->body.push_back(std::make_shared<Stmt>(Stmt::Kind::Skip));
    // Keep the statement alive alongside the program.
    CompiledProgram holder;
    auto code = std::make_shared<ProcCode>(*program.top);
    code->body = seq;
    holder.top = code;
    programs_.push_back(holder);
    frame->code = code.get();
    e.stmt = seq.get();
  }
  return new_thread(std::move(e));
}

ThreadId Runtime::spawn_unify(Ref a, Ref b) {
  Entry e;
  e.kind = Entry::Kind::UnifyRefs;
  e.refs = {a, b};
  return new_thread(std::move(e));
}

Ref Runtime::global(const std::string& name) const {
  const GlobalEnv::Entry* e = env_.find(name);
  return e ? e->ref : kNoRef;
}

ThreadId Runtime::new_thread(Entry first) {
  auto th = std::make_unique<Thread>();
  th->id = static_cast<ThreadId>(threads_.size() + 1);
  Context base;
  base.kind = Context::Kind::Base;
  base.stack.push_back(std::move(first));
  th->contexts.push_back(std::move(base));
  Thread& ref = *th;
  threads_.push_back(std::move(th));
  trace_event(ref.id, "spawn");
  enqueue(ref);
  return ref.id;
}

void Runtime::enqueue(Thread& th) {
  if (th.queued) return;
  th.queued = true;
  run_queue_.push_back(th.id);
}

void Runtime::trace_event(ThreadId tid, const std::string& event) {
  if (opts_.trace) trace_.push_back(std::to_string(clock_) + " " + std::to_string(tid) + " " + event);
}

// --- scheduling ----------------------------------------------------------------

Outcome Runtime::run() {
  failed_ = false;
  failure_.clear();
  while (true) {
    if (failed_) return Outcome::Failed;
    if (step_limit_hit_) return Outcome::StepLimit;
    if (run_slice()) continue;
    if (auto t = next_timer()) {
      advance_clock(*t);
      continue;
    }
    return settle_outcome();
  }
}

bool Runtime::run_slice() {
  if (run_queue_.empty()) return false;
  std::size_t idx = 0;
  if (opts_.policy == SchedPolicy::Random) idx = static_cast<std::size_t>(rng_() % run_queue_.size());
  ThreadId id = run_queue_[idx];
  run_queue_.erase(run_queue_.begin() + static_cast<std::ptrdiff_t>(idx));
  Thread& th = *threads_[id - 1];
  th.queued = false;
  if (th.status != Thread::Status::Runnable) return true;
  bool yielded = false;
  for (int n = 0; n < opts_.time_slice && th.status == Thread::Status::Runnable; ++n) {
    if (steps_ >= opts_.max_steps) {
      step_limit_hit_ = true;
      failure_ = "step budget of " + std::to_string(opts_.max_steps) + " reductions exhausted";
      break;
    }
    if (th.contexts.back().stack.empty()) {
      context_done(th);
      continue;
    }
    ++steps_;
    ++th.reductions;
    if (th.contexts.back().kind == Context::Kind::Engine) ++engine_reductions_;
    try {
      execute(th);
    } catch (const RuntimeError& e) {
      thread_failed(th, e.what());
    } catch (const StoreError& e) {
      thread_failed(th, e.what());
    }
    std::size_t depth = 0;
    for (auto& c : th.contexts) depth += c.stack.size();
    th.max_depth = std::max(th.max_depth, depth);
    if (yield_requested_) {
      yield_requested_ = false;
      yielded = true;
      break;
    }
  }
  if (th.status == Thread::Status::Runnable) {
    if (yielded) trace_event(th.id, "yield");
    enqueue(th);
  }
  return true;
}

std::optional<std::int64_t> Runtime::next_timer() const {
  if (timers_.empty()) return std::nullopt;
  return std::get<0>(timers_.top());
}

void Runtime::advance_clock(std::int64_t to) {
  if (to > clock_) {
    if (opts_.real_time) std::this_thread::sleep_for(std::chrono::milliseconds(to - clock_));
    clock_ = to;
  }
  while (!timers_.empty() && std::get<0>(timers_.top()) <= clock_) {
    ThreadId id = std::get<2>(timers_.top());
    timers_.pop();
    Thread& th = *threads_[id - 1];
    if (th.status != Thread::Status::Sleeping) continue;
    th.status = Thread::Status::Runnable;
    trace_event(id, "wake");
    enqueue(th);
  }
}

Outcome Runtime::settle_outcome() const {
  if (failed_) return Outcome::Failed;
  if (step_limit_hit_) return Outcome::StepLimit;
  for (auto& th : threads_)
    if (th->status == Thread::Status::Suspended || th->status == Thread::Status::Sleeping) return Outcome::Deadlock;
  return Outcome::AllDone;
}

std::vector<ThreadId> Runtime::blocked_threads() const {
  std::vector<ThreadId> out;
  for (auto& th : threads_)
    if (th->status == Thread::Status::Suspended) out.push_back(th->id);
  return out;
}

std::size_t Runtime::count_status(Thread::Status s) const {
  return static_cast<std::size_t>(
      std::count_if(threads_.begin(), threads_.end(), [s](const auto& t) { return t->status == s; }));
}

void Runtime::wake(const std::vector<ThreadId>& ids) {
  for (ThreadId id : ids) {
    Thread& th = *threads_[id - 1];
    if (th.status == Thread::Status::Suspended) {
      for (Ref v : th.waiting_on) store_.remove_waiter(v, id);
      th.waiting_on.clear();
    } else if (th.status == Thread::Status::NeedWait) {
      store_.remove_need_waiter(th.need_var, id);
      th.need_var = kNoRef;
    } else {
      continue;
    }
    th.status = Thread::Status::Runnable;
    trace_event(id, "wake");
    enqueue(th);
  }
}

void Runtime::suspend(Thread& th, std::vector<Ref> vars) {
  Context& top = th.contexts.back();
  if (top.kind == Context::Kind::Guard) {
    // Not yet entailed or disentailed: retry the whole guard later.
    store_.undo_trail(top.trail, 0);
    th.contexts.pop_back();
  }
  std::vector<Ref> unbound;
  for (Ref v : vars) {
    v = store_.deref(v);
    if (store_.is_unbound(v) && std::find(unbound.begin(), unbound.end(), v) == unbound.end()) unbound.push_back(v);
  }
  if (unbound.empty()) return;
  std::vector<ThreadId> woken;
  for (Ref v : unbound) {
    auto w = store_.add_waiter(v, th.id);
    woken.insert(woken.end(), w.begin(), w.end());
  }
  th.waiting_on = std::move(unbound);
  th.status = Thread::Status::Suspended;
  trace_event(th.id, "suspend");
  wake(woken);
}

void Runtime::suspend_need(Thread& th, Ref var) {
  store_.add_need_waiter(var, th.id);
  th.need_var = var;
  th.status = Thread::Status::NeedWait;
  trace_event(th.id, "suspend-need");
}

void Runtime::thread_failed(Thread& th, const std::string& why) {
  th.status = Thread::Status::Failed;
  th.contexts.clear();
  Context empty;
  th.contexts.push_back(std::move(empty));
  if (!failed_) failure_ = "thread " + std::to_string(th.id) + ": " + why;
  failed_ = true;
  trace_event(th.id, "fail");
}

std::string Runtime::where(const Thread& th) const {
  for (auto c = th.contexts.rbegin(); c != th.contexts.rend(); ++c) {
    if (!c->stack.empty() && c->stack.back().stmt) return to_string(c->stack.back().stmt->pos);
  }
  return "?";
}

void Runtime::error(const std::string& message) const { throw RuntimeError(message); }

// --- observation ---------------------------------------------------------------

std::vector<std::string> Runtime::output() const {
  std::vector<std::string> out;
  out.reserve(output_.size());
  for (auto& line : output_) out.push_back(line.live ? ozk::render(store_, line.term) : line.text);
  return out;
}

std::uint64_t Runtime::expansions(const std::string& proc) const {
  auto it = expansions_.find(proc);
  return it == expansions_.end() ? 0 : it->second;
}

std::string Runtime::render(Ref term) const { return ozk::render(store_, term); }

void Runtime::emit(Ref term, ThreadId thread, bool live) {
  OutputLine line;
  line.term = term;
  line.text = ozk::render(store_, term);
  line.live = live;
  line.thread = thread;
  line.clock = clock_;
  if (sink_) sink_(line.text);
  output_.push_back(std::move(line));
}

void Runtime::count_expansion() {
  if (current_code_) ++expansions_[current_code_->name];
}

namespace {

void collect_names(const Value& v, std::vector<const VarRef*>& out) {
  if (v.kind == Value::Kind::Var) out.push_back(&v.var);
  for (auto& a : v.args) collect_names(a, out);
}

}  // namespace

std::string Runtime::deadlock_report() const {
  std::string out;
  for (auto& th : threads_) {
    if (th->status != Thread::Status::Suspended) continue;
    std::vector<const VarRef*> refs;
    const Entry* top = nullptr;
    for (auto c = th->contexts.rbegin(); c != th->contexts.rend() && !top; ++c)
      if (!c->stack.empty()) top = &c->stack.back();
    if (top && top->kind == Entry::Kind::Stmt) {
      const Stmt& s = *top->stmt;
      switch (s.kind) {
        case Stmt::Kind::Unify:
          collect_names(static_cast<const UnifyStmt&>(s).lhs, refs);
          collect_names(static_cast<const UnifyStmt&>(s).rhs, refs);
          break;
        case Stmt::Kind::Call:
          collect_names(static_cast<const CallStmt&>(s).target, refs);
          for (auto& a : static_cast<const CallStmt&>(s).args) collect_names(a, refs);
          break;
        case Stmt::Kind::Op:
          collect_names(static_cast<const OpStmt&>(s).a, refs);
          collect_names(static_cast<const OpStmt&>(s).b, refs);
          break;
        case Stmt::Kind::If:
          collect_names(static_cast<const IfStmt&>(s).cond.a, refs);
          collect_names(static_cast<const IfStmt&>(s).cond.b, refs);
          break;
        case Stmt::Kind::Case:
          collect_names(static_cast<const CaseStmt&>(s).subject, refs);
          break;
        default:
          break;
      }
    }
    std::vector<std::string> names;
    for (Ref w : th->waiting_on) {
      std::string name;
      for (const VarRef* r : refs) {
        if (r->name.empty() || r->name[0] == '_' || !top->frame) continue;
        Ref v = lookup(*r, *top->frame);
        if (v != kNoRef && store_.deref(v) == store_.deref(w)) {
          name = r->name;
          break;
        }
      }
      names.push_back(name.empty() ? "an unbound variable" : name);
    }
    std::string line = "thread " + std::to_string(th->id) + " blocked";
    if (top && top->stmt) line += " at " + to_string(top->stmt->pos);
    line += " waiting for ";
    for (std::size_t i = 0; i < names.size(); ++i) line += (i ? ", " : "") + names[i];
    out += line + "\n";
  }
  return out;
}

// --- evaluation ----------------------------------------------------------------

Ref Runtime::lookup(const VarRef& v, const Frame& f) const {
  switch (v.where) {
    case VarRef::Where::Local:
      return f.slots[v.index];
    case VarRef::Where::Captured:
      return (*f.captures)[v.index];
    case VarRef::Where::Global:
      return v.index;
  }
  return kNoRef;
}

Ref Runtime::eval(const Value& v, const Frame& f) {
  switch (v.kind) {
    case Value::Kind::Var:
      return lookup(v.var, f);
    case Value::Kind::Atom:
      return store_.make_atom(v.atom);
    case Value::Kind::Int:
      return store_.make_int(v.num);
    case Value::Kind::Record: {
      std::vector<Ref> args;
      args.reserve(v.args.size());
      for (auto& a : v.args) args.push_back(eval(a, f));
      return store_.make_compound(v.atom, args);
    }
    case Value::Kind::Proc: {
      ClosureData cd;
      cd.code = v.proc.get();
      cd.arity = v.proc->arity();
      cd.captures.reserve(v.captures.size());
      for (auto& c : v.captures) cd.captures.push_back(lookup(c, f));
      return store_.make_closure(std::move(cd));
    }
  }
  return kNoRef;
}

const BindScope* Runtime::scope(Thread& th) {
  Context& c = th.contexts.back();
  if (c.kind == Context::Kind::Base) return nullptr;
  scope_.trail = &c.trail;
  scope_.trail_limit = c.trail_limit;
  scope_.escape_base = c.base_mark;
  return &scope_;
}

bool Runtime::unify(Thread& th, Ref a, Ref b) {
  UnifyResult r = store_.unify(a, b, scope(th));
  switch (r.status) {
    case UnifyResult::Status::Success:
      wake(r.woken);
      return true;
    case UnifyResult::Status::Failure:
      wake(r.woken);
      fail(th, "unification failed");
      return false;
    case UnifyResult::Status::Escape:
      wake(r.woken);
      if (th.contexts.back().kind == Context::Kind::Engine)
        error("EscapeError: search goal binds a variable created outside the search");
      suspend(th, {r.var});
      return false;
    case UnifyResult::Status::Remote:
      wake(r.woken);
      if (th.contexts.back().kind == Context::Kind::Engine)
        error("EscapeError: search goal binds a variable owned by another node");
      if (remote_ && th.contexts.back().kind == Context::Kind::Base) remote_(r.var, r.term);
      suspend(th, {r.var});
      return false;
  }
  return false;
}

void Runtime::push_unify(Thread& th, Ref a, Ref b) {
  Entry u;
  u.kind = Entry::Kind::UnifyRefs;
  u.refs = {a, b};
  th.contexts.back().stack.push_back(std::move(u));
}

// --- execution -----------------------------------------------------------------

void Runtime::execute(Thread& th) {
  Entry& e = th.contexts.back().stack.back();
  switch (e.kind) {
    case Entry::Kind::Stmt:
      exec_stmt(th);
      return;
    case Entry::Kind::Apply: {
      std::vector<Ref> args(e.refs.begin() + 1, e.refs.end());
      exec_call(th, e.refs[0], std::move(args));
      return;
    }
    case Entry::Kind::UnifyRefs:
      if (unify(th, e.refs[0], e.refs[1])) th.contexts.back().stack.pop_back();
      return;
    case Entry::Kind::SolveStream:
      exec_solve_stream(th);
      return;
  }
}

void Runtime::exec_stmt(Thread& th) {
  Context& ctx = th.contexts.back();
  Entry& e = ctx.stack.back();
  const Stmt& s = *e.stmt;
  switch (s.kind) {
    case Stmt::Kind::Skip:
      ctx.stack.pop_back();
      return;
    case Stmt::Kind::Fail:
      fail(th, "fail at " + to_string(s.pos));
      return;
    case Stmt::Kind::Seq: {
      auto& seq = static_cast<const SeqStmt&>(s);
      const Stmt* child = seq.body[e.pc].get();
      if (e.pc + 1 == seq.body.size()) {
        e.stmt = child;
        e.pc = 0;
      } else {
        ++e.pc;
        Entry c;
        c.stmt = child;
        c.frame = e.frame;
        ctx.stack.push_back(std::move(c));
      }
      return;
    }
    case Stmt::Kind::Local: {
      auto& local = static_cast<const LocalStmt&>(s);
      for (auto& d : local.decls) e.frame->slots[d.slot] = store_.new_var();
      e.stmt = local.body.get();
      e.pc = 0;
      return;
    }
    case Stmt::Kind::Unify: {
      auto& u = static_cast<const UnifyStmt&>(s);
      Ref a = eval(u.lhs, *e.frame);
      Ref b = eval(u.rhs, *e.frame);
      if (unify(th, a, b)) th.contexts.back().stack.pop_back();
      return;
    }
    case Stmt::Kind::Call: {
      auto& c = static_cast<const CallStmt&>(s);
      Ref target = eval(c.target, *e.frame);
      std::vector<Ref> args;
      args.reserve(c.args.size());
      for (auto& a : c.args) args.push_back(eval(a, *e.frame));
      exec_call(th, target, std::move(args));
      return;
    }
    case Stmt::Kind::Op:
      exec_op(th, static_cast<const OpStmt&>(s), *e.frame);
      return;
    case Stmt::Kind::If:
      exec_if(th, static_cast<const IfStmt&>(s), *e.frame);
      return;
    case Stmt::Kind::GuardIf:
      exec_guard_if(th, static_cast<const GuardIfStmt&>(s), e.frame, e.pc);
      return;
    case Stmt::Kind::Case: {
      FramePtr f = e.frame;
      exec_case(th, static_cast<const CaseStmt&>(s), f);
      return;
    }
    case Stmt::Kind::Choice: {
      FramePtr f = e.frame;
      exec_choice(th, static_cast<const ChoiceStmt&>(s), f);
      return;
    }
    case Stmt::Kind::Thread: {
      for (auto& c : th.contexts) {
        if (c.kind == Context::Kind::Engine) error("ThreadInSearchError: thread created inside a search goal at " + to_string(s.pos));
        if (c.kind == Context::Kind::Guard) error("thread created inside a guard at " + to_string(s.pos));
      }
      Entry c;
      c.stmt = static_cast<const ThreadStmt&>(s).body.get();
      c.frame = e.frame;
      ctx.stack.pop_back();
      new_thread(std::move(c));
      return;
    }
  }
}

void Runtime::exec_call(Thread& th, Ref target, std::vector<Ref> args) {
  Ref t = store_.deref(target);
  if (store_.is_unbound(t)) {
    suspend(th, {t});
    return;
  }
  if (store_.tag(t) != Tag::Closure) error("application of a non-procedure " + render(t));
  const ClosureData& cd = store_.closure(t);
  if (args.size() != cd.arity) {
    std::string name = cd.builtin >= 0 ? builtin_table()[static_cast<std::size_t>(cd.builtin)].name
                                       : (cd.code->name.empty() ? "procedure" : cd.code->name);
    error(name + " expects " + std::to_string(cd.arity) + " arguments but is given " + std::to_string(args.size()));
  }
  Context& ctx = th.contexts.back();
  if (cd.builtin >= 0) {
    Entry saved = std::move(ctx.stack.back());
    ctx.stack.pop_back();
    current_code_ = saved.frame ? saved.frame->code : nullptr;
    const BuiltinDef& def = builtin_table()[static_cast<std::size_t>(cd.builtin)];
    BuiltinResult r = def.fn(*this, th, args);
    switch (r.status) {
      case BuiltinResult::Status::Done:
        break;
      case BuiltinResult::Status::Suspend:
        th.contexts.back().stack.push_back(std::move(saved));
        suspend(th, std::move(r.vars));
        break;
      case BuiltinResult::Status::SuspendNeed:
        th.contexts.back().stack.push_back(std::move(saved));
        suspend_need(th, r.vars.at(0));
        break;
      case BuiltinResult::Status::Fail:
        fail(th, std::string(def.name) + " failed");
        break;
      case BuiltinResult::Status::Yield:
        yield_requested_ = true;
        break;
      case BuiltinResult::Status::Sleep:
        th.status = Thread::Status::Sleeping;
        timers_.emplace(clock_ + r.ms, ++timer_seq_, th.id);
        trace_event(th.id, "sleep");
        break;
    }
    return;
  }
  auto frame = std::make_shared<Frame>();
  frame->code = cd.code;
  frame->slots.assign(cd.code->frame_size, kNoRef);
  frame->captures = &cd.captures;
  for (std::size_t i = 0; i < args.size(); ++i) frame->slots[cd.code->param_slots[i]] = args[i];
  Entry& e = ctx.stack.back();
  e.kind = Entry::Kind::Stmt;
  e.stmt = cd.code->body.get();
  e.frame = std::move(frame);
  e.pc = 0;
  e.refs.clear();
  e.lazy.reset();
}

std::optional<bool> Runtime::compare(Thread& th, Op op, Ref a, Ref b) {
  a = store_.deref(a);
  b = store_.deref(b);
  if (op == Op::Eq || op == Op::Ne) {
    EqResult r = store_.equals(a, b);
    if (r.kind == EqResult::Kind::Undetermined) {
      suspend(th, std::move(r.suspend_on));
      return std::nullopt;
    }
    bool eq = r.kind == EqResult::Kind::True;
    return op == Op::Eq ? eq : !eq;
  }
  std::vector<Ref> unbound;
  if (store_.is_unbound(a)) unbound.push_back(a);
  if (store_.is_unbound(b)) unbound.push_back(b);
  if (!unbound.empty()) {
    suspend(th, std::move(unbound));
    return std::nullopt;
  }
  int c;
  if (store_.tag(a) == Tag::Int && store_.tag(b) == Tag::Int) {
    auto x = store_.int_value(a), y = store_.int_value(b);
    c = x < y ? -1 : (x > y ? 1 : 0);
  } else if (store_.tag(a) == Tag::Atom && store_.tag(b) == Tag::Atom) {
    c = atom_name(store_.atom(a)).compare(atom_name(store_.atom(b)));
  } else {
    error(std::string("cannot compare ") + render(a) + " " + op_text(op) + " " + render(b));
  }
  switch (op) {
    case Op::Lt:
      return c < 0;
    case Op::Gt:
      return c > 0;
    case Op::Le:
      return c <= 0;
    case Op::Ge:
      return c >= 0;
    default:
      return false;
  }
}

void Runtime::exec_op(Thread& th, const OpStmt& s, const Frame& f) {
  Ref a = eval(s.a, f);
  Ref b = eval(s.b, f);
  Ref value = kNoRef;
  if (is_comparison(s.op)) {
    auto r = compare(th, s.op, a, b);
    if (!r) return;
    if (!s.has_result) {
      if (*r) {
        th.contexts.back().stack.pop_back();
      } else {
        fail(th, std::string("test ") + op_text(s.op) + " failed at " + to_string(s.pos));
      }
      return;
    }
    value = store_.make_atom(*r ? atoms::true_() : atoms::false_());
  } else {
    a = store_.deref(a);
    b = store_.deref(b);
    std::vector<Ref> unbound;
    if (store_.is_unbound(a)) unbound.push_back(a);
    if (store_.is_unbound(b)) unbound.push_back(b);
    if (!unbound.empty()) {
      suspend(th, std::move(unbound));
      return;
    }
    if (store_.tag(a) != Tag::Int || store_.tag(b) != Tag::Int)
      error(std::string("arithmetic on non-integers: ") + render(a) + " " + op_text(s.op) + " " + render(b) + " at " +
            to_string(s.pos));
    std::int64_t x = store_.int_value(a), y = store_.int_value(b), z = 0;
    bool overflow = false;
    switch (s.op) {
      case Op::Add:
        overflow = __builtin_add_overflow(x, y, &z);
        break;
      case Op::Sub:
        overflow = __builtin_sub_overflow(x, y, &z);
        break;
      case Op::Mul:
        overflow = __builtin_mul_overflow(x, y, &z);
        break;
      case Op::Div:
      case Op::Mod:
        if (y == 0) error("division by zero at " + to_string(s.pos));
        if (x == std::numeric_limits<std::int64_t>::min() && y == -1) {
          overflow = s.op == Op::Div;
          z = 0;
        } else {
          z = s.op == Op::Div ? x / y : x % y;
        }
        break;
      default:
        break;
    }
    if (overflow) error("integer overflow at " + to_string(s.pos));
    value = store_.make_int(z);
  }
  if (unify(th, eval(s.result, f), value)) th.contexts.back().stack.pop_back();
}

void Runtime::exec_if(Thread& th, const IfStmt& s, const Frame& f) {
  bool truth;
  if (s.cond.is_comparison) {
    auto r = compare(th, s.cond.op, eval(s.cond.a, f), eval(s.cond.b, f));
    if (!r) return;
    truth = *r;
  } else {
    Ref v = store_.deref(eval(s.cond.a, f));
    if (store_.is_unbound(v)) {
      suspend(th, {v});
      return;
    }
    if (store_.is_atom(v, atoms::true_())) {
      truth = true;
    } else if (store_.is_atom(v, atoms::false_())) {
      truth = false;
    } else {
      error("condition is not a boolean: " + render(v) + " at " + to_string(s.pos));
    }
  }
  Entry& e = th.contexts.back().stack.back();
  e.stmt = truth ? s.then_branch.get() : s.else_branch.get();
  e.pc = 0;
}

namespace {

enum class Match : std::uint8_t { Yes, No, Wait };

Match match(const Store& store, const Pattern& p, Ref t, Frame& f, Ref& wait_on) {
  t = store.deref(t);
  switch (p.kind) {
    case Pattern::Kind::Wildcard:
      return Match::Yes;
    case Pattern::Kind::Capture:
      f.slots[p.slot] = t;
      return Match::Yes;
    default:
      break;
  }
  if (store.is_unbound(t)) {
    wait_on = t;
    return Match::Wait;
  }
  switch (p.kind) {
    case Pattern::Kind::Atom:
      return store.is_atom(t, p.atom) ? Match::Yes : Match::No;
    case Pattern::Kind::Int:
      return store.tag(t) == Tag::Int && store.int_value(t) == p.num ? Match::Yes : Match::No;
    case Pattern::Kind::Record: {
      if (store.tag(t) != Tag::Compound || store.label(t) != p.atom || store.arity(t) != p.args.size()) return Match::No;
      Match result = Match::Yes;
      for (std::uint32_t i = 0; i < p.args.size(); ++i) {
        Ref w = kNoRef;
        Match m = match(store, p.args[i], store.arg(t, i), f, w);
        if (m == Match::No) return Match::No;
        if (m == Match::Wait && result == Match::Yes) {
          result = Match::Wait;
          wait_on = w;
        }
      }
      return result;
    }
    default:
      return Match::No;
  }
}

}  // namespace

void Runtime::exec_case(Thread& th, const CaseStmt& s, const FramePtr& f) {
  Ref subject = eval(s.subject, *f);
  for (auto& arm : s.arms) {
    Ref wait_on = kNoRef;
    Match m = match(store_, arm.pattern, subject, *f, wait_on);
    if (m == Match::Wait) {
      suspend(th, {wait_on});
      return;
    }
    if (m == Match::Yes) {
      Entry& e = th.contexts.back().stack.back();
      e.stmt = arm.body.get();
      e.pc = 0;
      return;
    }
  }
  if (!s.else_branch) {
    fail(th, "no case arm matches " + render(subject) + " at " + to_string(s.pos));
    return;
  }
  Entry& e = th.contexts.back().stack.back();
  e.stmt = s.else_branch.get();
  e.pc = 0;
}

void Runtime::exec_guard_if(Thread& th, const GuardIfStmt& s, const FramePtr& f, std::uint32_t arm) {
  if (arm >= s.arms.size()) {
    Entry& e = th.contexts.back().stack.back();
    e.stmt = s.else_branch.get();
    e.pc = 0;
    return;
  }
  const GuardArm& g = s.arms[arm];
  Context c;
  c.kind = Context::Kind::Guard;
  c.base_mark = static_cast<Ref>(store_.size());
  c.trail_limit = c.base_mark;
  for (auto& d : g.guard_vars) f->slots[d.slot] = store_.new_var();
  Entry ge;
  ge.stmt = g.guard.get();
  ge.frame = f;
  c.stack.push_back(std::move(ge));
  th.contexts.push_back(std::move(c));
}

void Runtime::exec_choice(Thread& th, const ChoiceStmt& s, const FramePtr& f) {
  Context& ctx = th.contexts.back();
  if (ctx.kind == Context::Kind::Guard) error("choice inside a guard at " + to_string(s.pos));
  if (ctx.kind != Context::Kind::Engine)
    error("ChoiceOutsideSearchError: choice executed outside a search engine at " + to_string(s.pos));
  ctx.stack.pop_back();
  if (s.alternatives.size() > 1) {
    ChoicePoint cp;
    cp.trail_mark = ctx.trail.size();
    cp.prev_limit = ctx.trail_limit;
    cp.saved = ctx.stack;
    cp.choice = &s;
    cp.frame = f;
    cp.next = 1;
    ctx.choicepoints.push_back(std::move(cp));
    ctx.trail_limit = static_cast<Ref>(store_.size());
  }
  Entry alt;
  alt.stmt = s.alternatives[0].get();
  alt.frame = f;
  ctx.stack.push_back(std::move(alt));
}

// --- failure and contexts ------------------------------------------------------

void Runtime::fail(Thread& th, const std::string& why) {
  Context& top = th.contexts.back();
  switch (top.kind) {
    case Context::Kind::Engine:
      backtrack(th);
      return;
    case Context::Kind::Guard: {
      store_.undo_trail(top.trail, 0);
      th.contexts.pop_back();
      ++th.contexts.back().stack.back().pc;  // next guard arm
      return;
    }
    case Context::Kind::Base:
      thread_failed(th, why);
      return;
  }
}

void Runtime::backtrack(Thread& th) {
  Context& ctx = th.contexts.back();
  if (ctx.choicepoints.empty()) {
    engine_exhausted(th);
    return;
  }
  ChoicePoint& cp = ctx.choicepoints.back();
  store_.undo_trail(ctx.trail, cp.trail_mark);
  std::uint32_t i = cp.next++;
  const Stmt* alt = cp.choice->alternatives[i].get();
  FramePtr frame = cp.frame;
  if (cp.next == cp.choice->alternatives.size()) {
    ctx.stack = std::move(cp.saved);
    ctx.trail_limit = cp.prev_limit;
    ctx.choicepoints.pop_back();
  } else {
    ctx.stack = cp.saved;
  }
  Entry e;
  e.stmt = alt;
  e.frame = std::move(frame);
  ctx.stack.push_back(std::move(e));
}

void Runtime::context_done(Thread& th) {
  Context& ctx = th.contexts.back();
  switch (ctx.kind) {
    case Context::Kind::Base:
      th.status = Thread::Status::Terminated;
      trace_event(th.id, "done");
      return;
    case Context::Kind::Guard: {
      // Entailed: commit to the arm.
      th.contexts.pop_back();
      Entry& e = th.contexts.back().stack.back();
      auto& s = static_cast<const GuardIfStmt&>(*e.stmt);
      e.stmt = s.arms[e.pc].body.get();
      e.pc = 0;
      return;
    }
    case Context::Kind::Engine:
      engine_solution(th);
      return;
  }
}

void Runtime::start_engine(Thread& th, EngineMode mode, Ref goal, Ref out, std::shared_ptr<LazySolve> lazy) {
  Context c;
  c.kind = Context::Kind::Engine;
  c.base_mark = static_cast<Ref>(store_.size());
  c.trail_limit = c.base_mark;
  c.mode = mode;
  c.out = out;
  c.lazy = std::move(lazy);
  c.result = store_.new_var();
  Entry app;
  app.kind = Entry::Kind::Apply;
  app.refs = {goal, c.result};
  c.stack.push_back(std::move(app));
  th.contexts.push_back(std::move(c));
}

void Runtime::engine_solution(Thread& th) {
  Context& ctx = th.contexts.back();
  Ref base = ctx.base_mark;
  Ref sol = copy_graph(store_, ctx.result, store_, [&](Ref v) { return v < base ? v : store_.new_var(); });
  switch (ctx.mode) {
    case EngineMode::One: {
      Ref items[] = {sol};
      finish_engine(th, store_.list(items));
      return;
    }
    case EngineMode::All:
      ctx.solutions.push_back(sol);
      backtrack(th);
      return;
    case EngineMode::Lazy: {
      auto st = ctx.lazy;
      Ref next = store_.new_var();
      Ref cell = store_.cons(sol, next);
      Ref old = st->tail;
      st->tail = next;
      st->parked = std::make_unique<Context>(std::move(ctx));
      th.contexts.pop_back();
      push_unify(th, old, cell);
      return;
    }
  }
}

void Runtime::engine_exhausted(Thread& th) {
  Context& ctx = th.contexts.back();
  switch (ctx.mode) {
    case EngineMode::One:
      finish_engine(th, store_.nil());
      return;
    case EngineMode::All: {
      std::vector<Ref> sols = std::move(ctx.solutions);
      finish_engine(th, store_.list(sols));
      return;
    }
    case EngineMode::Lazy: {
      auto st = ctx.lazy;
      st->exhausted = true;
      store_.undo_trail(ctx.trail, 0);
      th.contexts.pop_back();
      push_unify(th, st->tail, store_.nil());
      return;
    }
  }
}

void Runtime::finish_engine(Thread& th, Ref value) {
  Context& ctx = th.contexts.back();
  Ref out = ctx.out;
  store_.undo_trail(ctx.trail, 0);
  th.contexts.pop_back();
  push_unify(th, out, value);
}

ThreadId Runtime::spawn_stream(Ref goal, Ref stream) {
  Entry e;
  e.kind = Entry::Kind::SolveStream;
  e.lazy = std::make_shared<LazySolve>();
  e.lazy->goal = goal;
  e.lazy->tail = stream;
  return new_thread(std::move(e));
}

void Runtime::exec_solve_stream(Thread& th) {
  Entry& e = th.contexts.back().stack.back();
  auto st = e.lazy;
  if (st->exhausted) {
    th.contexts.back().stack.pop_back();
    return;
  }
  Ref tail = store_.deref(st->tail);
  bool needed = !store_.is_unbound(tail) || store_.needed(tail);
  if (!needed) {
    suspend_need(th, tail);
    return;
  }
  if (!st->started) {
    st->started = true;
    start_engine(th, EngineMode::Lazy, st->goal, kNoRef, st);
    return;
  }
  th.contexts.push_back(std::move(*st->parked));
  st->parked.reset();
  backtrack(th);
}

}  // namespace ozk
