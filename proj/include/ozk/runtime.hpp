#pragma once

// Interpreter and green-thread scheduler. Each thread owns a stack of
// execution contexts: the base context, plus one context per active deep
// guard or search engine. Statements run over a single Store.

#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <optional>
#include <queue>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "ozk/compiler.hpp"
#include "ozk/store.hpp"

namespace ozk {

class RuntimeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class SchedPolicy : std::uint8_t { Fifo, Random };

struct RuntimeOptions {
  SchedPolicy policy = SchedPolicy::Fifo;
  std::uint64_t seed = 0;
  std::uint64_t max_steps = 100'000'000;
  int time_slice = 1000;
  bool trace = false;
  bool real_time = false;
  bool prelude = true;
  NodeId node = 0;
};

enum class Outcome : std::uint8_t { AllDone, Deadlock, Failed, StepLimit };
const char* outcome_name(Outcome o);

struct Frame {
  const ProcCode* code = nullptr;
  std::vector<Ref> slots;
  const std::vector<Ref>* captures = nullptr;
};
using FramePtr = std::shared_ptr<Frame>;

struct LazySolve;

struct Entry {
  enum class Kind : std::uint8_t {
    Stmt,
    Apply,        // call refs[0] with refs[1..]
    UnifyRefs,    // unify refs[0] with refs[1]
    SolveStream,  // producer loop of a lazy Solve
  };
  Kind kind = Kind::Stmt;
  const Stmt* stmt = nullptr;
  FramePtr frame;
  std::uint32_t pc = 0;
  std::vector<Ref> refs;
  std::shared_ptr<LazySolve> lazy;
};

struct ChoicePoint {
  std::size_t trail_mark = 0;
  Ref prev_limit = 0;
  std::vector<Entry> saved;
  const ChoiceStmt* choice = nullptr;
  FramePtr frame;
  std::uint32_t next = 1;
};

enum class EngineMode : std::uint8_t { One, All, Lazy };

struct Context {
  enum class Kind : std::uint8_t { Base, Guard, Engine };
  Kind kind = Kind::Base;
  std::vector<Entry> stack;
  std::vector<ChoicePoint> choicepoints;
  std::vector<Ref> trail;
  Ref base_mark = 0;    // variables below this were created outside
  Ref trail_limit = 0;  // variables below this are trailed when bound
  EngineMode mode = EngineMode::One;
  Ref result = kNoRef;
  Ref out = kNoRef;
  std::vector<Ref> solutions;
  std::shared_ptr<LazySolve> lazy;
};

struct LazySolve {
  Ref goal = kNoRef;
  Ref tail = kNoRef;
  bool started = false;
  bool exhausted = false;
  std::unique_ptr<Context> parked;
};

struct Thread {
  enum class Status : std::uint8_t { Runnable, Suspended, NeedWait, Sleeping, Terminated, Failed };
  ThreadId id = 0;
  Status status = Status::Runnable;
  std::vector<Context> contexts;
  std::vector<Ref> waiting_on;
  Ref need_var = kNoRef;
  std::uint64_t reductions = 0;
  std::size_t max_depth = 0;
  bool queued = false;
};

struct OutputLine {
  Ref term = kNoRef;
  std::string text;  // rendering at the time of the call
  bool live = true;  // Browse re-renders at the end of the run; Show does not
  ThreadId thread = 0;
  std::int64_t clock = 0;
};

class Runtime;

struct BuiltinResult {
  enum class Status : std::uint8_t { Done, Suspend, SuspendNeed, Fail, Yield, Sleep };
  Status status = Status::Done;
  std::vector<Ref> vars;
  std::int64_t ms = 0;

  static BuiltinResult done() { return {}; }
  static BuiltinResult suspend(std::vector<Ref> v) { return {Status::Suspend, std::move(v), 0}; }
  static BuiltinResult fail() { return {Status::Fail, {}, 0}; }
};

using BuiltinFn = BuiltinResult (*)(Runtime&, Thread&, std::span<const Ref>);

struct BuiltinDef {
  const char* name;
  std::uint32_t arity;
  BuiltinFn fn;
};

/// Native procedures. Defined in builtins.cpp.
std::span<const BuiltinDef> builtin_table();
/// Kernel source of the prelude (Map, Filter, ...).
std::string_view prelude_source();

class Runtime {
 public:
  explicit Runtime(RuntimeOptions options = {});
  Runtime(const Runtime&) = delete;
  Runtime& operator=(const Runtime&) = delete;

  Store& store() { return store_; }
  const Store& store() const { return store_; }
  GlobalEnv& env() { return env_; }
  const RuntimeOptions& options() const { return opts_; }

  // --- loading -------------------------------------------------------------
  /// Parses, compiles and spawns a thread for the program. Throws
  /// SyntaxError or CompileError.
  ThreadId load(std::string_view source);
  /// Spawns a thread running the selected items of a compiled program.
  ThreadId spawn_program(const CompiledProgram& program, const std::function<bool(const TopItem&)>& keep = {});
  ThreadId spawn_unify(Ref a, Ref b);
  /// Global variable by name, kNoRef if unknown.
  Ref global(const std::string& name) const;

  // --- running -------------------------------------------------------------
  Outcome run();
  /// Runs one time slice of one runnable thread. False when none is runnable.
  bool run_slice();
  bool has_runnable() const { return !run_queue_.empty(); }
  std::optional<std::int64_t> next_timer() const;
  void advance_clock(std::int64_t to);
  std::int64_t clock() const { return clock_; }
  /// Outcome once nothing is runnable and no timers are pending.
  Outcome settle_outcome() const;
  bool failed() const { return failed_; }
  bool step_limit_hit() const { return step_limit_hit_; }
  const std::string& failure() const { return failure_; }
  std::string deadlock_report() const;
  std::vector<ThreadId> blocked_threads() const;

  // --- observation ---------------------------------------------------------
  std::vector<std::string> output() const;
  const std::vector<OutputLine>& output_lines() const { return output_; }
  void set_output_sink(std::function<void(const std::string&)> sink) { sink_ = std::move(sink); }
  const std::vector<std::string>& trace() const { return trace_; }
  std::uint64_t steps() const { return steps_; }
  std::uint64_t engine_reductions() const { return engine_reductions_; }
  std::uint64_t expansions(const std::string& proc) const;
  std::size_t thread_count() const { return threads_.size(); }
  const Thread& thread(ThreadId id) const { return *threads_.at(id - 1); }
  std::size_t count_status(Thread::Status s) const;
  std::string render(Ref term) const;

  // --- distribution hook ---------------------------------------------------
  /// Called when a unification needs to bind a proxy variable. The thread
  /// suspends on `var` until the binding arrives.
  void set_remote_bind_handler(std::function<void(Ref var, Ref term)> handler) { remote_ = std::move(handler); }
  void wake(const std::vector<ThreadId>& ids);

  // --- used by builtins ----------------------------------------------------
  void emit(Ref term, ThreadId thread, bool live);
  void start_engine(Thread& th, EngineMode mode, Ref goal, Ref out, std::shared_ptr<LazySolve> lazy = {});
  ThreadId spawn_stream(Ref goal, Ref stream);
  void push_unify(Thread& th, Ref a, Ref b);
  void count_expansion();
  [[noreturn]] void error(const std::string& message) const;

 private:
  ThreadId new_thread(Entry first);
  void enqueue(Thread& th);
  void trace_event(ThreadId tid, const std::string& event);
  const BindScope* scope(Thread& th);

  void execute(Thread& th);
  void exec_stmt(Thread& th);
  void exec_call(Thread& th, Ref target, std::vector<Ref> args);
  void exec_op(Thread& th, const OpStmt& s, const Frame& f);
  std::optional<bool> compare(Thread& th, Op op, Ref a, Ref b);
  void exec_if(Thread& th, const IfStmt& s, const Frame& f);
  void exec_case(Thread& th, const CaseStmt& s, const FramePtr& f);
  void exec_guard_if(Thread& th, const GuardIfStmt& s, const FramePtr& f, std::uint32_t arm);
  void exec_choice(Thread& th, const ChoiceStmt& s, const FramePtr& f);
  void exec_solve_stream(Thread& th);
  bool unify(Thread& th, Ref a, Ref b);

  Ref eval(const Value& v, const Frame& f);
  Ref lookup(const VarRef& v, const Frame& f) const;

  void suspend(Thread& th, std::vector<Ref> vars);
  void suspend_need(Thread& th, Ref var);
  void fail(Thread& th, const std::string& why);
  void backtrack(Thread& th);
  void context_done(Thread& th);
  void engine_solution(Thread& th);
  void engine_exhausted(Thread& th);
  void finish_engine(Thread& th, Ref value);
  void thread_failed(Thread& th, const std::string& why);
  std::string where(const Thread& th) const;

  RuntimeOptions opts_;
  Store store_;
  GlobalEnv env_;
  std::vector<std::unique_ptr<Thread>> threads_;
  std::deque<ThreadId> run_queue_;
  std::mt19937_64 rng_;
  std::int64_t clock_ = 0;
  std::uint64_t timer_seq_ = 0;
  using Timer = std::tuple<std::int64_t, std::uint64_t, ThreadId>;
  std::priority_queue<Timer, std::vector<Timer>, std::greater<Timer>> timers_;
  std::vector<CompiledProgram> programs_;
  std::vector<OutputLine> output_;
  std::function<void(const std::string&)> sink_;
  std::vector<std::string> trace_;
  std::function<void(Ref, Ref)> remote_;
  std::unordered_map<std::string, std::uint64_t> expansions_;
  const ProcCode* current_code_ = nullptr;
  std::uint64_t steps_ = 0;
  std::uint64_t engine_reductions_ = 0;
  bool failed_ = false;
  bool step_limit_hit_ = false;
  bool yield_requested_ = false;
  BindScope scope_;
  std::string failure_;
};

}  // namespace ozk
