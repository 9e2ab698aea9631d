#pragma once

#include <string>

#include "ozk/store.hpp"

namespace ozk {

/// Canonical textual form of a term, as shown by Browse.
///
///   proper lists     [a b c]
///   partial lists    a|b|_
///   unbound vars     _G1, _G2, ... numbered by first appearance
///   records          f(a b)
///   negative ints    ~5
///   cycles           @1=f(@1)
///   procedures       <P/2 Name>
std::string render(const Store& store, Ref term);

/// Standard order of terms: unbound variables (by id) < integers < atoms
/// (lexicographic) < compounds (arity, then label, then arguments).
/// Returns <0, 0 or >0.
int compare_terms(const Store& store, Ref a, Ref b);

/// Quotes an atom name when it is not a plain lowercase identifier.
std::string atom_text(const std::string& name);

}  // namespace ozk
