#include "ozk/compiler.hpp"

#include <algorithm>
#include <optional>
#include <set>
#include <unordered_set>

namespace ozk {

namespace {

using K = Phrase::Kind;

struct LocalInfo {
  std::uint32_t slot = 0;
  int arity = -1;
};

struct ProcCtx {
  ProcCtx* parent = nullptr;
  std::vector<std::unordered_map<std::string, LocalInfo>> scopes;
  std::uint32_t frame_size = 0;
  std::vector<std::string> capture_names;
  std::vector<VarRef> capture_sources;
  std::unordered_map<std::string, std::uint32_t> capture_index;
  std::unordered_map<std::string, int> capture_arity;
  int guard_scope = -1;  // first scope index that belongs to the current guard
};

struct Resolved {
  VarRef ref;
  int arity = -1;
  bool guard_local = false;
};

StmtPtr make_skip(SourcePos pos) { return std::make_shared<Stmt>(Stmt::Kind::Skip, pos); }

StmtPtr make_seq(std::vector<StmtPtr> body, SourcePos pos) {
  body.erase(std::remove_if(body.begin(), body.end(), [](const StmtPtr& s) { return s->kind == Stmt::Kind::Skip; }),
             body.end());
  if (body.empty()) return make_skip(pos);
  if (body.size() == 1) return body[0];
  auto s = std::make_shared<SeqStmt>(pos);
  for (auto& b : body) {
    if (b->kind == Stmt::Kind::Seq) {
      for (auto& inner : static_cast<const SeqStmt&>(*b).body) s->body.push_back(inner);
    } else {
      s->body.push_back(std::move(b));
    }
  }
  return s;
}

StmtPtr make_local(std::vector<Decl> decls, StmtPtr body, SourcePos pos) {
  if (decls.empty()) return body;
  auto s = std::make_shared<LocalStmt>(pos);
  s->decls = std::move(decls);
  s->body = std::move(body);
  return s;
}

StmtPtr make_unify(Value a, Value b, SourcePos pos) {
  auto s = std::make_shared<UnifyStmt>(pos);
  s->lhs = std::move(a);
  s->rhs = std::move(b);
  return s;
}

std::optional<Op> op_from(const std::string& text) {
  static const std::unordered_map<std::string, Op> ops = {
      {"+", Op::Add}, {"-", Op::Sub}, {"*", Op::Mul},  {"div", Op::Div}, {"mod", Op::Mod}, {"==", Op::Eq},
      {"\\=", Op::Ne}, {"<", Op::Lt},  {">", Op::Gt},   {"=<", Op::Le},   {">=", Op::Ge}};
  auto it = ops.find(text);
  if (it == ops.end()) return std::nullopt;
  return it->second;
}

bool is_value_like(const Phrase& p) {
  switch (p.kind) {
    case K::Var:
    case K::Atom:
    case K::Int:
    case K::Wildcard:
    case K::Record:
    case K::Cons:
    case K::List:
      return true;
    case K::Proc:
    case K::Fun:
      return p.head && p.head->kind == K::Dollar;
    default:
      return false;
  }
}

void pattern_vars(const Phrase& p, std::vector<std::string>& out) {
  switch (p.kind) {
    case K::Var:
      if (std::find(out.begin(), out.end(), p.name) == out.end()) out.push_back(p.name);
      break;
    case K::Record:
    case K::Cons:
    case K::List:
      for (auto& i : p.items) pattern_vars(*i, out);
      break;
    default:
      break;
  }
}

// Identifiers read by a top-level `=` right-hand side outside any nested
// procedure or control construct.
void operand_vars(const Phrase& p, std::vector<std::string>& out) {
  switch (p.kind) {
    case K::Var:
      if (std::find(out.begin(), out.end(), p.name) == out.end()) out.push_back(p.name);
      break;
    case K::Record:
    case K::Cons:
    case K::List:
    case K::BinOp:
      for (auto& i : p.items) operand_vars(*i, out);
      break;
    default:
      break;
  }
}

int def_arity(const Phrase& p) {
  return static_cast<int>(p.items.size()) + (p.kind == K::Fun ? 1 : 0);
}

class Compiler {
 public:
  Compiler(GlobalEnv& env) : env_(env) {}

  CompiledProgram program(const std::vector<PhrasePtr>& phrases, const GlobalAllocator& alloc) {
    ProcCtx top;
    top.scopes.emplace_back();
    ctx_ = &top;
    CompiledProgram out;

    std::vector<std::pair<std::string, bool>> implicit;
    std::unordered_set<std::string> seen;
    std::unordered_map<std::string, int> arities;
    auto add = [&](const std::string& name, bool def, bool force) {
      if (!seen.insert(name).second) return;
      const GlobalEnv::Entry* e = env_.find(name);
      if (!force && e && !e->shadowable) return;
      implicit.emplace_back(name, def);
    };
    std::function<void(const Phrase&)> collect = [&](const Phrase& p) {
      switch (p.kind) {
        case K::Declare:
          for (auto& d : p.body.decls) {
            std::vector<std::string> vars;
            if (d->kind == K::Unify) {
              pattern_vars(*d->items[0], vars);
            } else if ((d->kind == K::Proc || d->kind == K::Fun) && d->head->kind == K::Var) {
              vars.push_back(d->head->name);
              arities[d->head->name] = def_arity(*d);
            } else {
              pattern_vars(*d, vars);
            }
            for (auto& v : vars) add(v, d->kind == K::Proc || d->kind == K::Fun, true);
          }
          break;
        case K::Unify: {
          std::vector<std::string> vars;
          pattern_vars(*p.items[0], vars);
          for (auto& v : vars) add(v, false, false);
          break;
        }
        case K::Proc:
        case K::Fun:
          if (p.head && p.head->kind == K::Var) {
            add(p.head->name, true, false);
            arities[p.head->name] = def_arity(p);
          }
          break;
        case K::Thread:
          for (auto& s : p.body.stmts) collect(*s);
          break;
        default:
          break;
      }
    };
    for (auto& p : phrases) collect(*p);
    // `Y=X+1` at top level introduces X too when nothing else defines it.
    std::function<void(const Phrase&)> collect_reads = [&](const Phrase& p) {
      if (p.kind == K::Thread) {
        for (auto& s : p.body.stmts) collect_reads(*s);
      } else if (p.kind == K::Unify) {
        std::vector<std::string> vars;
        operand_vars(*p.items[1], vars);
        for (auto& v : vars)
          if (!env_.find(v)) add(v, false, false);
      }
    };
    for (auto& p : phrases) collect_reads(*p);
    for (auto& [name, def] : implicit) {
      GlobalEnv::Entry e;
      e.ref = alloc(name, def);
      if (auto it = arities.find(name); it != arities.end()) e.arity = it->second;
      env_.names[name] = e;
      out.declared.push_back(name);
    }

    int thread_count = 0;
    std::vector<StmtPtr> all;
    for (auto& p : phrases) {
      TopItem item;
      if (p->kind == K::Declare) {
        std::vector<StmtPtr> parts;
        for (auto& d : p->body.decls)
          if (d->kind != K::Var) parts.push_back(stmt(*d));
        if (parts.empty()) continue;
        item.stmt = make_seq(std::move(parts), p->pos);
      } else {
        item.stmt = stmt(*p);
      }
      if ((p->kind == K::Proc || p->kind == K::Fun) && p->head && p->head->kind == K::Var) {
        item.kind = TopItem::Kind::Definition;
      } else if (p->kind == K::Thread) {
        item.kind = TopItem::Kind::Thread;
        item.thread_index = ++thread_count;
      }
      all.push_back(item.stmt);
      out.items.push_back(std::move(item));
    }
    auto code = std::make_shared<ProcCode>();
    code->name = "<top>";
    code->frame_size = top.frame_size;
    code->body = make_seq(std::move(all), {});
    out.top = code;
    ctx_ = nullptr;
    return out;
  }

  std::shared_ptr<const ProcCode> single_procedure(const Phrase& def) {
    ProcCtx top;
    top.scopes.emplace_back();
    ctx_ = &top;
    if (def.head && def.head->kind == K::Var)
      top.scopes.back()[def.head->name] = LocalInfo{top.frame_size++, def_arity(def)};
    Value v = proc_value(def);
    ctx_ = nullptr;
    return v.proc;
  }

 private:
  // --- scopes ----------------------------------------------------------------

  std::uint32_t new_slot() { return ctx_->frame_size++; }

  std::uint32_t declare(const std::string& name, int arity = -1) {
    auto& scope = ctx_->scopes.back();
    if (auto it = scope.find(name); it != scope.end()) {
      if (arity >= 0) it->second.arity = arity;
      return it->second.slot;
    }
    std::uint32_t slot = new_slot();
    scope[name] = LocalInfo{slot, arity};
    return slot;
  }

  std::optional<Resolved> resolve_in(ProcCtx* c, const std::string& name) {
    for (int i = static_cast<int>(c->scopes.size()) - 1; i >= 0; --i) {
      auto it = c->scopes[static_cast<std::size_t>(i)].find(name);
      if (it != c->scopes[static_cast<std::size_t>(i)].end()) {
        Resolved r;
        r.ref = VarRef{VarRef::Where::Local, it->second.slot, name};
        r.arity = it->second.arity;
        r.guard_local = c == ctx_ && c->guard_scope >= 0 && i >= c->guard_scope;
        return r;
      }
    }
    if (auto it = c->capture_index.find(name); it != c->capture_index.end()) {
      Resolved r;
      r.ref = VarRef{VarRef::Where::Captured, it->second, name};
      r.arity = c->capture_arity[name];
      return r;
    }
    if (c->parent) {
      auto outer = resolve_in(c->parent, name);
      if (!outer) return std::nullopt;
      if (outer->ref.where == VarRef::Where::Global) return Resolved{outer->ref, outer->arity, false};
      auto idx = static_cast<std::uint32_t>(c->capture_sources.size());
      c->capture_sources.push_back(outer->ref);
      c->capture_names.push_back(name);
      c->capture_index[name] = idx;
      c->capture_arity[name] = outer->arity;
      return Resolved{VarRef{VarRef::Where::Captured, idx, name}, outer->arity, false};
    }
    if (const GlobalEnv::Entry* e = env_.find(name)) return Resolved{VarRef{VarRef::Where::Global, e->ref, name}, e->arity, false};
    return std::nullopt;
  }

  Resolved resolve(const std::string& name, SourcePos pos) {
    auto r = resolve_in(ctx_, name);
    if (!r) throw CompileError(pos, "variable " + name + " not introduced");
    return *r;
  }

  Value temp() {
    std::uint32_t slot = new_slot();
    pending_->push_back(Decl{slot, "_T" + std::to_string(++temp_counter_)});
    return Value::variable(VarRef{VarRef::Where::Local, slot, pending_->back().name});
  }

  // Runs `fn` with a fresh list of temporaries, wrapping its output in a
  // Local that declares them.
  template <class Fn>
  StmtPtr with_temps(SourcePos pos, Fn fn) {
    std::vector<Decl> temps;
    auto* saved = pending_;
    pending_ = &temps;
    std::vector<StmtPtr> out;
    fn(out);
    pending_ = saved;
    return make_local(std::move(temps), make_seq(std::move(out), pos), pos);
  }

  // --- bodies ----------------------------------------------------------------

  std::vector<std::string> declare_body(const Body& b) {
    std::vector<std::string> names;
    for (auto& d : b.decls) {
      switch (d->kind) {
        case K::Var:
          pattern_vars(*d, names);
          break;
        case K::Unify:
          pattern_vars(*d->items[0], names);
          break;
        case K::Proc:
        case K::Fun:
          if (d->head && d->head->kind == K::Var) {
            pattern_vars(*d->head, names);
            break;
          }
          [[fallthrough]];
        default:
          throw CompileError(d->pos, "invalid declaration");
      }
    }
    for (auto& n : names) declare(n);
    auto note_arity = [&](const Phrase& p) {
      if ((p.kind == K::Proc || p.kind == K::Fun) && p.head && p.head->kind == K::Var) {
        auto& scope = ctx_->scopes.back();
        if (auto it = scope.find(p.head->name); it != scope.end()) it->second.arity = def_arity(p);
      }
    };
    for (auto& d : b.decls) note_arity(*d);
    for (auto& s : b.stmts) note_arity(*s);
    return names;
  }

  std::vector<Decl> scope_decls(const std::vector<std::string>& names) {
    std::vector<Decl> decls;
    for (auto& n : names) decls.push_back(Decl{ctx_->scopes.back()[n].slot, n});
    return decls;
  }

  StmtPtr body_stmt(const Body& b, SourcePos pos) {
    ctx_->scopes.emplace_back();
    auto names = declare_body(b);
    std::vector<StmtPtr> parts;
    for (auto& d : b.decls)
      if (d->kind != K::Var) parts.push_back(stmt(*d));
    for (auto& s : b.stmts) parts.push_back(stmt(*s));
    auto decls = scope_decls(names);
    ctx_->scopes.pop_back();
    return make_local(std::move(decls), make_seq(std::move(parts), pos), pos);
  }

  StmtPtr body_into(const Body& b, const Value& target, SourcePos pos) {
    if (b.stmts.empty()) throw CompileError(pos, "expression expected");
    ctx_->scopes.emplace_back();
    auto names = declare_body(b);
    std::vector<StmtPtr> parts;
    for (auto& d : b.decls)
      if (d->kind != K::Var) parts.push_back(stmt(*d));
    for (std::size_t i = 0; i + 1 < b.stmts.size(); ++i) parts.push_back(stmt(*b.stmts[i]));
    const Phrase& last = *b.stmts.back();
    parts.push_back(with_temps(last.pos, [&](std::vector<StmtPtr>& out) { expr_into(last, target, out); }));
    auto decls = scope_decls(names);
    ctx_->scopes.pop_back();
    return make_local(std::move(decls), make_seq(std::move(parts), pos), pos);
  }

  // --- statements --------------------------------------------------------------

  StmtPtr stmt(const Phrase& p) {
    return with_temps(p.pos, [&](std::vector<StmtPtr>& out) { stmt_into(p, out); });
  }

  bool mentions_guard_local(const Phrase& p) {
    switch (p.kind) {
      case K::Wildcard:
        return true;
      case K::Var: {
        auto r = resolve_in(ctx_, p.name);
        return r && r->guard_local;
      }
      case K::Record:
      case K::Cons:
      case K::List:
        return std::any_of(p.items.begin(), p.items.end(), [&](const PhrasePtr& i) { return mentions_guard_local(*i); });
      default:
        return false;
    }
  }

  void check_quiet(const Phrase& a, const Phrase& b, SourcePos pos) {
    if (a.kind != K::Var) return;
    auto r = resolve(a.name, a.pos);
    if (r.guard_local || mentions_guard_local(b)) return;
    throw CompileError(pos, "guard binds outer variable " + a.name + " (guards must be quiet; use == to test)");
  }

  void stmt_into(const Phrase& p, std::vector<StmtPtr>& out) {
    switch (p.kind) {
      case K::Skip:
        out.push_back(make_skip(p.pos));
        return;
      case K::Fail:
        out.push_back(std::make_shared<Stmt>(Stmt::Kind::Fail, p.pos));
        return;
      case K::Unify: {
        const Phrase& l = *p.items[0];
        const Phrase& r = *p.items[1];
        if (ctx_->guard_scope >= 0) {
          check_quiet(l, r, p.pos);
          check_quiet(r, l, p.pos);
        }
        if (!is_value_like(r) || is_value_like(l)) {
          Value v = to_value(l, out);
          expr_into(r, v, out);
        } else {
          Value v = to_value(r, out);
          expr_into(l, v, out);
        }
        return;
      }
      case K::Call:
        call(p, nullptr, out);
        return;
      case K::BinOp: {
        auto op = op_from(p.name);
        if (!op || !is_comparison(*op)) throw CompileError(p.pos, "expression '" + p.name + "' used as a statement");
        auto s = std::make_shared<OpStmt>(p.pos);
        s->op = *op;
        s->a = to_value(*p.items[0], out);
        s->b = to_value(*p.items[1], out);
        out.push_back(s);
        return;
      }
      case K::Proc:
      case K::Fun: {
        if (!p.head || p.head->kind != K::Var) throw CompileError(p.pos, "anonymous procedure used as a statement");
        Value name = Value::variable(resolve(p.head->name, p.head->pos).ref);
        out.push_back(make_unify(name, proc_value(p), p.pos));
        return;
      }
      case K::If:
        out.push_back(if_stmt(p, nullptr));
        return;
      case K::Case:
        out.push_back(case_stmt(p, nullptr));
        return;
      case K::Choice: {
        auto s = std::make_shared<ChoiceStmt>(p.pos);
        for (auto& alt : p.alternatives) s->alternatives.push_back(body_stmt(alt, p.pos));
        out.push_back(s);
        return;
      }
      case K::Thread: {
        auto s = std::make_shared<ThreadStmt>(p.pos);
        s->body = body_stmt(p.body, p.pos);
        out.push_back(s);
        return;
      }
      case K::Local:
        out.push_back(body_stmt(p.body, p.pos));
        return;
      case K::Declare:
        throw CompileError(p.pos, "declare is only allowed at top level");
      default:
        throw CompileError(p.pos, "value used as a statement");
    }
  }

  // {F A1 ... An}; with `target` the result goes to the `$` argument or is
  // appended as a last argument.
  void call(const Phrase& p, const Value* target, std::vector<StmtPtr>& out) {
    auto s = std::make_shared<CallStmt>(p.pos);
    const Phrase& f = *p.items[0];
    int known = -1;
    if (f.kind == K::Var) {
      auto r = resolve(f.name, f.pos);
      known = r.arity;
      s->target = Value::variable(r.ref);
    } else {
      s->target = to_value(f, out);
    }
    int dollars = 0;
    for (std::size_t i = 1; i < p.items.size(); ++i) {
      const Phrase& a = *p.items[i];
      if (a.kind == K::Dollar) {
        if (!target) throw CompileError(a.pos, "'$' outside an expression");
        if (++dollars > 1) throw CompileError(a.pos, "more than one '$' in an application");
        s->args.push_back(*target);
      } else {
        s->args.push_back(to_value(a, out));
      }
    }
    if (target && dollars == 0) s->args.push_back(*target);
    if (known >= 0 && static_cast<int>(s->args.size()) != known) {
      throw CompileError(p.pos, f.name + " expects " + std::to_string(known) + " arguments but is given " +
                                    std::to_string(s->args.size()));
    }
    out.push_back(s);
  }

  // --- expressions -------------------------------------------------------------

  Value to_value(const Phrase& e, std::vector<StmtPtr>& out) {
    switch (e.kind) {
      case K::Var:
        return Value::variable(resolve(e.name, e.pos).ref);
      case K::Atom:
        return Value::atom_value(intern(e.name));
      case K::Int:
        return Value::int_value(e.num);
      case K::Wildcard:
        return temp();
      case K::Record:
      case K::Cons:
      case K::List:
        return construct(e, out, out);
      case K::Proc:
      case K::Fun:
        if (e.head && e.head->kind == K::Dollar) return proc_value(e);
        throw CompileError(e.pos, "named procedure used as an expression");
      case K::Dollar:
        throw CompileError(e.pos, "'$' outside an application");
      default: {
        Value t = temp();
        expr_into(e, t, out);
        return t;
      }
    }
  }

  // Record value for a constructor. Computations nested in arguments go to
  // `deferred`; in result position that is after the unification, which
  // keeps recursive calls in tail position.
  Value construct(const Phrase& e, std::vector<StmtPtr>& deferred, std::vector<StmtPtr>& out) {
    std::vector<const Phrase*> args;
    AtomId label;
    if (e.kind == K::List) {
      // [a b c] is a|(b|(c|nil))
      Value tail = Value::atom_value(atoms::nil());
      std::vector<Value> items;
      for (auto& i : e.items) items.push_back(arg_value(*i, deferred, out));
      for (auto it = items.rbegin(); it != items.rend(); ++it) {
        Value cell;
        cell.kind = Value::Kind::Record;
        cell.atom = atoms::cons();
        cell.args = {std::move(*it), std::move(tail)};
        tail = std::move(cell);
      }
      return tail;
    }
    label = e.kind == K::Cons ? atoms::cons() : intern(e.name);
    Value v;
    v.kind = Value::Kind::Record;
    v.atom = label;
    for (auto& i : e.items) v.args.push_back(arg_value(*i, deferred, out));
    return v;
  }

  Value arg_value(const Phrase& a, std::vector<StmtPtr>& deferred, std::vector<StmtPtr>& out) {
    if (a.kind == K::Record || a.kind == K::Cons || a.kind == K::List) return construct(a, deferred, out);
    if (is_value_like(a)) return to_value(a, out);
    if (a.kind == K::Dollar) throw CompileError(a.pos, "'$' outside an application");
    Value t = temp();
    expr_into(a, t, deferred);
    return t;
  }

  void expr_into(const Phrase& e, const Value& target, std::vector<StmtPtr>& out) {
    switch (e.kind) {
      case K::Var:
      case K::Atom:
      case K::Int:
      case K::Wildcard:
      case K::Proc:
      case K::Fun:
        out.push_back(make_unify(target, to_value(e, out), e.pos));
        return;
      case K::Record:
      case K::Cons:
      case K::List: {
        std::vector<StmtPtr> after;
        Value v = construct(e, after, out);
        out.push_back(make_unify(target, std::move(v), e.pos));
        for (auto& s : after) out.push_back(std::move(s));
        return;
      }
      case K::Call:
        call(e, &target, out);
        return;
      case K::BinOp: {
        if (e.name == "andthen" || e.name == "orelse") {
          bool is_and = e.name == "andthen";
          StmtPtr rest = with_temps(e.pos, [&](std::vector<StmtPtr>& o) { expr_into(*e.items[1], target, o); });
          StmtPtr constant = make_unify(target, Value::atom_value(is_and ? atoms::false_() : atoms::true_()), e.pos);
          out.push_back(is_and ? cond_stmt(*e.items[0], rest, constant) : cond_stmt(*e.items[0], constant, rest));
          return;
        }
        auto op = op_from(e.name);
        if (!op) throw CompileError(e.pos, "unknown operator " + e.name);
        auto s = std::make_shared<OpStmt>(e.pos);
        s->op = *op;
        s->a = to_value(*e.items[0], out);
        s->b = to_value(*e.items[1], out);
        s->has_result = true;
        s->result = target;
        out.push_back(s);
        return;
      }
      case K::Unify: {
        Value v = to_value(*e.items[0], out);
        expr_into(*e.items[1], v, out);
        out.push_back(make_unify(target, v, e.pos));
        return;
      }
      case K::If:
        out.push_back(if_stmt(e, &target));
        return;
      case K::Case:
        out.push_back(case_stmt(e, &target));
        return;
      case K::Local:
        out.push_back(body_into(e.body, target, e.pos));
        return;
      case K::Thread: {
        auto s = std::make_shared<ThreadStmt>(e.pos);
        s->body = body_into(e.body, target, e.pos);
        out.push_back(s);
        return;
      }
      case K::Choice: {
        auto s = std::make_shared<ChoiceStmt>(e.pos);
        for (auto& alt : e.alternatives) s->alternatives.push_back(body_into(alt, target, e.pos));
        out.push_back(s);
        return;
      }
      case K::Fail:
        out.push_back(std::make_shared<Stmt>(Stmt::Kind::Fail, e.pos));
        return;
      case K::Skip:
        throw CompileError(e.pos, "skip used as an expression");
      case K::Dollar:
        throw CompileError(e.pos, "'$' outside an application");
      case K::Declare:
        throw CompileError(e.pos, "declare is only allowed at top level");
    }
  }

  // --- procedures --------------------------------------------------------------

  Value proc_value(const Phrase& p) {
    ProcCtx inner;
    inner.parent = ctx_;
    inner.scopes.emplace_back();
    ProcCtx* saved = ctx_;
    auto* saved_pending = pending_;
    pending_ = nullptr;
    ctx_ = &inner;
    auto code = std::make_shared<ProcCode>();
    code->pos = p.pos;
    code->name = p.head && p.head->kind == K::Var ? p.head->name : "";
    code->from_function = p.kind == K::Fun;
    code->lazy = p.lazy;
    for (auto& param : p.items) {
      if (inner.scopes.back().count(param->name)) throw CompileError(param->pos, "parameter " + param->name + " repeated");
      code->param_names.push_back(param->name);
      code->param_slots.push_back(declare(param->name));
    }
    if (p.kind == K::Fun) {
      std::uint32_t slot = new_slot();
      code->param_names.push_back("_R");
      code->param_slots.push_back(slot);
      Value result = Value::variable(VarRef{VarRef::Where::Local, slot, "_R"});
      StmtPtr body = body_into(p.body, result, p.pos);
      if (p.lazy) {
        auto wait = std::make_shared<CallStmt>(p.pos);
        auto it = env_.internal.find("WaitNeeded");
        if (it == env_.internal.end()) throw CompileError(p.pos, "lazy functions need the WaitNeeded builtin");
        wait->target = Value::variable(VarRef{VarRef::Where::Global, it->second, "WaitNeeded"});
        wait->args.push_back(result);
        auto th = std::make_shared<ThreadStmt>(p.pos);
        th->body = make_seq({wait, body}, p.pos);
        body = th;
      }
      code->body = body;
    } else {
      if (p.lazy) throw CompileError(p.pos, "only functions can be lazy");
      code->body = body_stmt(p.body, p.pos);
    }
    code->frame_size = inner.frame_size;
    code->capture_names = inner.capture_names;
    ctx_ = saved;
    pending_ = saved_pending;
    Value v;
    v.kind = Value::Kind::Proc;
    v.proc = code;
    v.captures = inner.capture_sources;
    return v;
  }

  // --- conditionals ------------------------------------------------------------

  StmtPtr cond_stmt(const Phrase& c, StmtPtr then_s, StmtPtr else_s) {
    if (c.kind == K::BinOp && c.name == "andthen") return cond_stmt(*c.items[0], cond_stmt(*c.items[1], then_s, else_s), else_s);
    if (c.kind == K::BinOp && c.name == "orelse") return cond_stmt(*c.items[0], then_s, cond_stmt(*c.items[1], then_s, else_s));
    return with_temps(c.pos, [&](std::vector<StmtPtr>& out) {
      auto s = std::make_shared<IfStmt>(c.pos);
      auto op = c.kind == K::BinOp ? op_from(c.name) : std::nullopt;
      if (op && is_comparison(*op)) {
        s->cond.is_comparison = true;
        s->cond.op = *op;
        s->cond.a = to_value(*c.items[0], out);
        s->cond.b = to_value(*c.items[1], out);
      } else {
        s->cond.a = to_value(c, out);
      }
      s->then_branch = std::move(then_s);
      s->else_branch = std::move(else_s);
      out.push_back(s);
    });
  }

  StmtPtr branch(const Body& b, const Value* target, SourcePos pos) {
    return target ? body_into(b, *target, pos) : body_stmt(b, pos);
  }

  StmtPtr if_stmt(const Phrase& p, const Value* target) {
    StmtPtr else_s;
    if (p.else_body) {
      else_s = branch(*p.else_body, target, p.pos);
    } else if (target) {
      throw CompileError(p.pos, "if expression without else");
    } else {
      else_s = make_skip(p.pos);
    }
    for (auto it = p.if_arms.rbegin(); it != p.if_arms.rend(); ++it) {
      const IfArm& arm = *it;
      if (!arm.deep) {
        StmtPtr body = branch(arm.body, target, p.pos);
        else_s = cond_stmt(*arm.cond, body, else_s);
        continue;
      }
      ctx_->scopes.emplace_back();
      GuardArm g;
      for (auto& v : arm.guard_vars) g.guard_vars.push_back(Decl{declare(v), v});
      int saved_guard = ctx_->guard_scope;
      ctx_->guard_scope = static_cast<int>(ctx_->scopes.size()) - 1;
      std::vector<StmtPtr> parts;
      for (auto& s : arm.guard.stmts) parts.push_back(stmt(*s));
      g.guard = make_seq(std::move(parts), p.pos);
      ctx_->guard_scope = saved_guard;
      g.body = branch(arm.body, target, p.pos);
      ctx_->scopes.pop_back();
      auto s = std::make_shared<GuardIfStmt>(p.pos);
      s->arms.push_back(std::move(g));
      s->else_branch = else_s;
      else_s = s;
    }
    return else_s;
  }

  Pattern pattern(const Phrase& p, std::unordered_set<std::string>& names) {
    Pattern out;
    switch (p.kind) {
      case K::Wildcard:
        out.kind = Pattern::Kind::Wildcard;
        break;
      case K::Var:
        if (!names.insert(p.name).second) throw CompileError(p.pos, "pattern variable " + p.name + " appears twice");
        out.kind = Pattern::Kind::Capture;
        out.name = p.name;
        out.slot = declare(p.name);
        break;
      case K::Atom:
        out.kind = Pattern::Kind::Atom;
        out.atom = intern(p.name);
        break;
      case K::Int:
        out.kind = Pattern::Kind::Int;
        out.num = p.num;
        break;
      case K::Record:
      case K::Cons:
        out.kind = Pattern::Kind::Record;
        out.atom = p.kind == K::Cons ? atoms::cons() : intern(p.name);
        for (auto& a : p.items) out.args.push_back(pattern(*a, names));
        break;
      case K::List: {
        Pattern tail;
        tail.kind = Pattern::Kind::Atom;
        tail.atom = atoms::nil();
        std::vector<Pattern> items;
        for (auto& a : p.items) items.push_back(pattern(*a, names));
        for (auto it = items.rbegin(); it != items.rend(); ++it) {
          Pattern cell;
          cell.kind = Pattern::Kind::Record;
          cell.atom = atoms::cons();
          cell.args = {std::move(*it), std::move(tail)};
          tail = std::move(cell);
        }
        return tail;
      }
      default:
        throw CompileError(p.pos, "invalid pattern");
    }
    return out;
  }

  StmtPtr case_stmt(const Phrase& p, const Value* target) {
    return with_temps(p.pos, [&](std::vector<StmtPtr>& out) {
      auto s = std::make_shared<CaseStmt>(p.pos);
      s->subject = to_value(*p.head, out);
      for (auto& arm : p.case_arms) {
        ctx_->scopes.emplace_back();
        std::unordered_set<std::string> names;
        CaseArm a;
        a.pattern = pattern(*arm.pattern, names);
        a.body = branch(arm.body, target, p.pos);
        ctx_->scopes.pop_back();
        s->arms.push_back(std::move(a));
      }
      if (p.else_body) s->else_branch = branch(*p.else_body, target, p.pos);
      out.push_back(s);
    });
  }

  GlobalEnv& env_;
  ProcCtx* ctx_ = nullptr;
  std::vector<Decl>* pending_ = nullptr;
  int temp_counter_ = 0;
};

}  // namespace

CompiledProgram compile_program(const std::vector<PhrasePtr>& program, GlobalEnv& env, const GlobalAllocator& alloc) {
  Compiler c(env);
  return c.program(program, alloc);
}

CompiledProgram compile_source(std::string_view source, GlobalEnv& env, const GlobalAllocator& alloc) {
  auto phrases = parse_program(source);
  return compile_program(phrases, env, alloc);
}

std::shared_ptr<const ProcCode> compile_procedure(const Phrase& def, GlobalEnv& env) {
  if (def.kind != Phrase::Kind::Proc && def.kind != Phrase::Kind::Fun)
    throw CompileError(def.pos, "procedure definition expected");
  Compiler c(env);
  return c.single_procedure(def);
}

}  // namespace ozk
