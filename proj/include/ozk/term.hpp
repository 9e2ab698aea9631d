#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>

namespace ozk {

/// Index of a node in a Store's arena.
using Ref = std::uint32_t;
using AtomId = std::uint32_t;
using ThreadId = std::uint32_t;
using NodeId = std::uint32_t;

inline constexpr Ref kNoRef = 0xffffffffu;

/// Global identity of a logic variable. Ordered by (origin_node, seq); the
/// greater variable is always bound to the lesser one.
struct VarId {
  NodeId origin_node = 0;
  std::uint64_t seq = 0;

  auto operator<=>(const VarId&) const = default;
  bool operator==(const VarId&) const = default;
};

std::string to_string(const VarId& id);

enum class Tag : std::uint8_t { Var, Atom, Int, Compound, Closure };

/// Process-wide atom interning. Safe to use from several runtimes at once.
AtomId intern(std::string_view name);
const std::string& atom_name(AtomId id);

namespace atoms {
AtomId nil();
AtomId cons();  // "|"
AtomId true_();
AtomId false_();
AtomId unit();
}  // namespace atoms

}  // namespace ozk

template <>
struct std::hash<ozk::VarId> {
  std::size_t operator()(const ozk::VarId& v) const noexcept {
    return std::hash<std::uint64_t>{}(v.seq * 1315423911u ^ v.origin_node);
  }
};
