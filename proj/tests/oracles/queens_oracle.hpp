#pragma once

// Brute force n-queens: every permutation, keep the ones with no shared
// diagonal. Independent of the interpreter.

#include <algorithm>
#include <cstdlib>
#include <numeric>
#include <set>
#include <vector>

namespace oracle {

inline std::set<std::vector<int>> queens_solutions(int n) {
  std::vector<int> p(static_cast<std::size_t>(n));
  std::iota(p.begin(), p.end(), 1);
  std::set<std::vector<int>> out;
  do {
    bool ok = true;
    for (int i = 0; i < n && ok; ++i)
      for (int j = i + 1; j < n && ok; ++j)
        if (std::abs(p[static_cast<std::size_t>(i)] - p[static_cast<std::size_t>(j)]) == j - i) ok = false;
    if (ok) out.insert(p);
  } while (std::next_permutation(p.begin(), p.end()));
  return out;
}

}  // namespace oracle
