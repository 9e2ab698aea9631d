#pragma once

// Desugaring of surface phrases into kernel statements: functions become
// procedures with a result parameter, nested expressions become temporaries,
// identifiers are resolved to frame slots, captures or globals.

#include <functional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "ozk/ast.hpp"
#include "ozk/syntax.hpp"

namespace ozk {

class CompileError : public std::runtime_error {
 public:
  CompileError(SourcePos pos, const std::string& message)
      : std::runtime_error(to_string(pos) + ": error: " + message), pos_(pos) {}
  SourcePos pos() const { return pos_; }

 private:
  SourcePos pos_;
};

/// Names visible at top level: builtins, prelude definitions and variables
/// declared by earlier programs in the same session.
struct GlobalEnv {
  struct Entry {
    Ref ref = kNoRef;
    int arity = -1;           // known procedure arity, -1 if unknown
    bool shadowable = false;  // builtins and prelude: a user definition replaces them
  };
  std::unordered_map<std::string, Entry> names;
  /// Procedures the desugarer itself emits calls to (WaitNeeded).
  std::unordered_map<std::string, Ref> internal;

  const Entry* find(const std::string& name) const {
    auto it = names.find(name);
    return it == names.end() ? nullptr : &it->second;
  }
};

struct TopItem {
  enum class Kind : std::uint8_t { Definition, Thread, Main };
  Kind kind = Kind::Main;
  int thread_index = 0;  // 1-based, for Thread items
  StmtPtr stmt;
};

struct CompiledProgram {
  /// Frame layout for top-level temporaries; body runs every item in order.
  std::shared_ptr<const ProcCode> top;
  std::vector<TopItem> items;
  std::vector<std::string> declared;  // globals introduced by this program
};

/// Creates the store variable for a new global. `definition` is true when
/// the name is bound by a top-level proc or fun.
using GlobalAllocator = std::function<Ref(const std::string& name, bool definition)>;

CompiledProgram compile_program(const std::vector<PhrasePtr>& program, GlobalEnv& env, const GlobalAllocator& alloc);
CompiledProgram compile_source(std::string_view source, GlobalEnv& env, const GlobalAllocator& alloc);

/// Compiles a single procedure definition in an empty scope (globals only).
/// Used by tests that compare desugared shapes.
std::shared_ptr<const ProcCode> compile_procedure(const Phrase& def, GlobalEnv& env);

}  // namespace ozk
