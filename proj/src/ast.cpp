#include "ozk/ast.hpp"

namespace ozk {

const char* op_text(Op op) {
  switch (op) {
    case Op::Add:
      return "+";
    case Op::Sub:
      return "-";
    case Op::Mul:
      return "*";
    case Op::Div:
      return "div";
    case Op::Mod:
      return "mod";
    case Op::Eq:
      return "==";
    case Op::Ne:
      return "\\=";
    case Op::Lt:
      return "<";
    case Op::Gt:
      return ">";
    case Op::Le:
      return "=<";
    case Op::Ge:
      return ">=";
  }
  return "?";
}

bool is_comparison(Op op) { return op >= Op::Eq; }

namespace {

bool same_ref(const VarRef& a, const VarRef& b) { return a.where == b.where && a.index == b.index; }

bool same_ptr(const StmtPtr& a, const StmtPtr& b) {
  if (!a || !b) return !a && !b;
  return same_structure(*a, *b);
}

bool same_pattern(const Pattern& a, const Pattern& b) {
  if (a.kind != b.kind || a.slot != b.slot || a.atom != b.atom || a.num != b.num || a.args.size() != b.args.size())
    return false;
  for (std::size_t i = 0; i < a.args.size(); ++i)
    if (!same_pattern(a.args[i], b.args[i])) return false;
  return true;
}

bool same_decls(const std::vector<Decl>& a, const std::vector<Decl>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i].slot != b[i].slot) return false;
  return true;
}

bool same_values(const std::vector<Value>& a, const std::vector<Value>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!same_structure(a[i], b[i])) return false;
  return true;
}

}  // namespace

bool same_structure(const Value& a, const Value& b) {
  if (a.kind != b.kind) return false;
  switch (a.kind) {
    case Value::Kind::Var:
      return same_ref(a.var, b.var);
    case Value::Kind::Atom:
      return a.atom == b.atom;
    case Value::Kind::Int:
      return a.num == b.num;
    case Value::Kind::Record:
      return a.atom == b.atom && same_values(a.args, b.args);
    case Value::Kind::Proc: {
      if (a.captures.size() != b.captures.size()) return false;
      for (std::size_t i = 0; i < a.captures.size(); ++i)
        if (!same_ref(a.captures[i], b.captures[i])) return false;
      const ProcCode& x = *a.proc;
      const ProcCode& y = *b.proc;
      return x.param_slots == y.param_slots && x.frame_size == y.frame_size && x.lazy == y.lazy &&
             same_ptr(x.body, y.body);
    }
  }
  return false;
}

bool same_structure(const Stmt& a, const Stmt& b) {
  if (a.kind != b.kind) return false;
  switch (a.kind) {
    case Stmt::Kind::Skip:
    case Stmt::Kind::Fail:
      return true;
    case Stmt::Kind::Seq: {
      auto& x = static_cast<const SeqStmt&>(a);
      auto& y = static_cast<const SeqStmt&>(b);
      if (x.body.size() != y.body.size()) return false;
      for (std::size_t i = 0; i < x.body.size(); ++i)
        if (!same_ptr(x.body[i], y.body[i])) return false;
      return true;
    }
    case Stmt::Kind::Local: {
      auto& x = static_cast<const LocalStmt&>(a);
      auto& y = static_cast<const LocalStmt&>(b);
      return same_decls(x.decls, y.decls) && same_ptr(x.body, y.body);
    }
    case Stmt::Kind::Unify: {
      auto& x = static_cast<const UnifyStmt&>(a);
      auto& y = static_cast<const UnifyStmt&>(b);
      return same_structure(x.lhs, y.lhs) && same_structure(x.rhs, y.rhs);
    }
    case Stmt::Kind::Call: {
      auto& x = static_cast<const CallStmt&>(a);
      auto& y = static_cast<const CallStmt&>(b);
      return same_structure(x.target, y.target) && same_values(x.args, y.args);
    }
    case Stmt::Kind::Op: {
      auto& x = static_cast<const OpStmt&>(a);
      auto& y = static_cast<const OpStmt&>(b);
      return x.op == y.op && x.has_result == y.has_result && same_structure(x.a, y.a) &&
             same_structure(x.b, y.b) && (!x.has_result || same_structure(x.result, y.result));
    }
    case Stmt::Kind::If: {
      auto& x = static_cast<const IfStmt&>(a);
      auto& y = static_cast<const IfStmt&>(b);
      return x.cond.is_comparison == y.cond.is_comparison && x.cond.op == y.cond.op &&
             same_structure(x.cond.a, y.cond.a) &&
             (!x.cond.is_comparison || same_structure(x.cond.b, y.cond.b)) &&
             same_ptr(x.then_branch, y.then_branch) && same_ptr(x.else_branch, y.else_branch);
    }
    case Stmt::Kind::GuardIf: {
      auto& x = static_cast<const GuardIfStmt&>(a);
      auto& y = static_cast<const GuardIfStmt&>(b);
      if (x.arms.size() != y.arms.size()) return false;
      for (std::size_t i = 0; i < x.arms.size(); ++i) {
        if (!same_decls(x.arms[i].guard_vars, y.arms[i].guard_vars) || !same_ptr(x.arms[i].guard, y.arms[i].guard) ||
            !same_ptr(x.arms[i].body, y.arms[i].body))
          return false;
      }
      return same_ptr(x.else_branch, y.else_branch);
    }
    case Stmt::Kind::Case: {
      auto& x = static_cast<const CaseStmt&>(a);
      auto& y = static_cast<const CaseStmt&>(b);
      if (!same_structure(x.subject, y.subject) || x.arms.size() != y.arms.size()) return false;
      for (std::size_t i = 0; i < x.arms.size(); ++i)
        if (!same_pattern(x.arms[i].pattern, y.arms[i].pattern) || !same_ptr(x.arms[i].body, y.arms[i].body))
          return false;
      return same_ptr(x.else_branch, y.else_branch);
    }
    case Stmt::Kind::Choice: {
      auto& x = static_cast<const ChoiceStmt&>(a);
      auto& y = static_cast<const ChoiceStmt&>(b);
      if (x.alternatives.size() != y.alternatives.size()) return false;
      for (std::size_t i = 0; i < x.alternatives.size(); ++i)
        if (!same_ptr(x.alternatives[i], y.alternatives[i])) return false;
      return true;
    }
    case Stmt::Kind::Thread:
      return same_ptr(static_cast<const ThreadStmt&>(a).body, static_cast<const ThreadStmt&>(b).body);
  }
  return false;
}

}  // namespace ozk
