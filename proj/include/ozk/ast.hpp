#pragma once

// Kernel statement language: the flat form every program is desugared to
// before execution. All nested expressions have been replaced by temporaries,
// identifiers are resolved to frame slots, captures or global store refs.

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "ozk/term.hpp"

namespace ozk {

struct SourcePos {
  int line = 0;
  int column = 0;
};

std::string to_string(const SourcePos& pos);

struct VarRef {
  enum class Where : std::uint8_t { Local, Captured, Global };
  Where where = Where::Local;
  std::uint32_t index = 0;  // frame slot, capture index, or store Ref
  std::string name;
};

struct ProcCode;

/// A value expression: something that can be materialized without
/// computation (variables, constants, records of values, procedure values).
struct Value {
  enum class Kind : std::uint8_t { Var, Atom, Int, Record, Proc };
  Kind kind = Kind::Atom;
  VarRef var;
  AtomId atom = 0;  // Atom, Record label
  std::int64_t num = 0;
  std::vector<Value> args;
  std::shared_ptr<const ProcCode> proc;
  std::vector<VarRef> captures;  // read in the creating frame

  static Value variable(VarRef v) {
    Value out;
    out.kind = Kind::Var;
    out.var = std::move(v);
    return out;
  }
  static Value atom_value(AtomId a) {
    Value out;
    out.kind = Kind::Atom;
    out.atom = a;
    return out;
  }
  static Value int_value(std::int64_t n) {
    Value out;
    out.kind = Kind::Int;
    out.num = n;
    return out;
  }
};

enum class Op : std::uint8_t { Add, Sub, Mul, Div, Mod, Eq, Ne, Lt, Gt, Le, Ge };

const char* op_text(Op op);
bool is_comparison(Op op);

struct Pattern {
  enum class Kind : std::uint8_t { Wildcard, Capture, Atom, Int, Record };
  Kind kind = Kind::Wildcard;
  std::uint32_t slot = 0;
  std::string name;
  AtomId atom = 0;
  std::int64_t num = 0;
  std::vector<Pattern> args;
};

struct Stmt;
using StmtPtr = std::shared_ptr<const Stmt>;

struct Decl {
  std::uint32_t slot = 0;
  std::string name;
};

struct Stmt {
  enum class Kind : std::uint8_t {
    Skip,
    Fail,
    Seq,
    Local,
    Unify,
    Call,
    Op,       // arithmetic/comparison into a result, or a comparison test
    If,       // boolean condition
    GuardIf,  // deep-guard arms
    Case,
    Choice,
    Thread,
  };
  Kind kind;
  SourcePos pos;

  explicit Stmt(Kind k, SourcePos p = {}) : kind(k), pos(p) {}
  virtual ~Stmt() = default;
};

struct SeqStmt : Stmt {
  std::vector<StmtPtr> body;
  explicit SeqStmt(SourcePos p = {}) : Stmt(Kind::Seq, p) {}
};

struct LocalStmt : Stmt {
  std::vector<Decl> decls;
  StmtPtr body;
  explicit LocalStmt(SourcePos p = {}) : Stmt(Kind::Local, p) {}
};

struct UnifyStmt : Stmt {
  Value lhs, rhs;
  explicit UnifyStmt(SourcePos p = {}) : Stmt(Kind::Unify, p) {}
};

struct CallStmt : Stmt {
  Value target;
  std::vector<Value> args;
  explicit CallStmt(SourcePos p = {}) : Stmt(Kind::Call, p) {}
};

struct OpStmt : Stmt {
  Op op = Op::Add;
  Value a, b;
  bool has_result = false;  // false: comparison used as a test
  Value result;
  explicit OpStmt(SourcePos p = {}) : Stmt(Kind::Op, p) {}
};

/// Condition of a boolean `if`: either a comparison or a value that must be
/// the atom true or false.
struct Cond {
  bool is_comparison = false;
  Op op = Op::Eq;
  Value a, b;
};

struct IfStmt : Stmt {
  Cond cond;
  StmtPtr then_branch, else_branch;
  explicit IfStmt(SourcePos p = {}) : Stmt(Kind::If, p) {}
};

struct GuardArm {
  std::vector<Decl> guard_vars;
  StmtPtr guard;
  StmtPtr body;
};

struct GuardIfStmt : Stmt {
  std::vector<GuardArm> arms;
  StmtPtr else_branch;
  explicit GuardIfStmt(SourcePos p = {}) : Stmt(Kind::GuardIf, p) {}
};

struct CaseArm {
  Pattern pattern;
  StmtPtr body;
};

struct CaseStmt : Stmt {
  Value subject;
  std::vector<CaseArm> arms;
  StmtPtr else_branch;  // null: no match fails
  explicit CaseStmt(SourcePos p = {}) : Stmt(Kind::Case, p) {}
};

struct ChoiceStmt : Stmt {
  std::vector<StmtPtr> alternatives;
  explicit ChoiceStmt(SourcePos p = {}) : Stmt(Kind::Choice, p) {}
};

struct ThreadStmt : Stmt {
  StmtPtr body;
  explicit ThreadStmt(SourcePos p = {}) : Stmt(Kind::Thread, p) {}
};

/// Compiled procedure. Functions have been desugared: the result is the
/// last parameter.
struct ProcCode {
  std::string name;  // empty for anonymous procedures
  std::vector<std::string> param_names;
  std::vector<std::uint32_t> param_slots;
  std::vector<std::string> capture_names;
  std::uint32_t frame_size = 0;
  StmtPtr body;
  SourcePos pos;
  bool from_function = false;
  bool lazy = false;

  std::uint32_t arity() const { return static_cast<std::uint32_t>(param_slots.size()); }
};

/// Structural equality of kernel statements, ignoring source positions.
bool same_structure(const Stmt& a, const Stmt& b);
bool same_structure(const Value& a, const Value& b);

}  // namespace ozk
